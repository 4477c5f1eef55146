// Storage and feature probes.
function mix(a, b) { return (a * 31 + b) % 1000003; }

var hasLocal = typeof localStorage !== "undefined";
var marker = "fp_marker";
localStorage.setItem(marker, "1");
var present = localStorage.getItem(marker) === "1";
localStorage.removeItem(marker);
var acc = 7;
var codes = [102, 112, 119, 97, 115, 109];
for (var i = 0; i < codes.length; i++) {
  acc = mix(acc, codes[i]);
}
for (let r = 0; r < 5; r++) {
  acc = (acc + 1) % 1000003;
}
var flags = [hasLocal, present, typeof sessionStorage === "object"];
console.log(flags.join(","), acc);
window.__fp_hash = flags.join(",") + ":" + acc;
