// Canvas geometry and gradient fingerprint.
function sq(a) { return a * a; }

var c = document.createElement("canvas");
c.width = 120;
c.height = 120;
var g = c.getContext('2d');
var radii = [10, 20, 30, 40];
var shades = ["#ff0000", "#00ff00", "#0000ff", "#ffff00"];
for (let k = 0; k < 4; k++) {
  g.beginPath();
}
let idx = 0;
while (idx < radii.length) {
  g.fillStyle = shades[idx];
  g.beginPath();
  g.arc(60, 60, radii[idx], 0, Math.PI * 2, true);
  g.closePath();
  g.fill();
  idx++;
}
var grad = g.createLinearGradient(0, 0, 120, 0);
grad.addColorStop(0, "red");
grad.addColorStop(1, "blue");
g.fillStyle = grad;
g.fillRect(0, 0, sq(5), sq(6));
if (g.isPointInPath(5, 5)) {
  console.log("winding", "even");
} else {
  console.log("winding", "odd");
}
window.__fp_hash = c.toDataURL();
console.log(window.__fp_hash.slice(0, 40));
