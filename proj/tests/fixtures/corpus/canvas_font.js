// Font enumeration through text metrics.
var fonts = ["Arial", "Verdana", "Courier New", "Georgia", "Times New Roman", "Trebuchet MS", "Impact",
  "Comic Sans MS", "Tahoma", "Palatino", "Garamond", "Bookman", "Candara", "Calibri", "Cambria",
  "Consolas", "Futura", "Helvetica", "Lucida Console", "Monaco", "Optima", "Segoe UI"];
var probe = "mmmmmmmmmmlli";
var cv = document.createElement("canvas");
var ctx = cv.getContext("2d");
var widths = [];
var base = 72;
ctx.font = base + "px monospace";
var ref = ctx.measureText(probe).width;
var n = 0;
while (n < fonts.length) {
  ctx.font = base + "px '" + fonts[n] + "', monospace";
  widths.push(Math.round(ctx.measureText(probe).width - ref));
  n += 1;
}
var detected = [];
for (var j = 0; j < fonts.length; j++) {
  if (widths[j] !== 0) {
    detected.push(fonts[j]);
  }
}
console.log("fonts", detected.length);
window.__fp_hash = detected.join(",") + "|" + widths.join(",");
