// Screen geometry, partly through hex-encoded keys.
const props = {
  "\x61\x76\x61\x69\x6C\x48\x65\x69\x67\x68\x74": "availHeight",
  "\x61\x76\x61\x69\x6C\x57\x69\x64\x74\x68": "availWidth",
  "\x63\x6F\x6C\x6F\x72\x44\x65\x70\x74\x68": "colorDepth"};

const propKey = "\x61\x76\x61\x69\x6C\x48\x65\x69\x67\x68\x74";
const value = screen[props[propKey]];
var depth = screen.colorDepth;
var w = screen.width;
var h = screen.height;
var ratio = (w / h).toFixed(3);
var summary = [value, depth, w, h, ratio, screen.availWidth].join("x");
console.log(summary);
window.__fp_hash = summary;
