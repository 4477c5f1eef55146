// Classic canvas text fingerprint.
function djb2(s) {
  var h = 5381;
  for (var i = 0; i < s.length; i++) {
    h = ((h * 33) ^ s.charCodeAt(i)) >>> 0;
  }
  return h.toString(16);
}

var canvas = document.createElement("canvas");
canvas.width = 240;
canvas.height = 60;
var ctx = canvas.getContext("2d");
var banner = "BrowserLeaks,com <canvas> 1.0";
ctx.textBaseline = "top";
ctx.font = "14px 'Arial'";
ctx.fillStyle = "#f60";
ctx.fillRect(125, 1, 62, 20);
ctx.fillStyle = "#069";
ctx.fillText(banner, 2, 15);
ctx.fillStyle = "rgba(102, 204, 0, 0.7)";
ctx.fillText(banner, 4, 17);
var data = canvas.toDataURL();
console.log("len", data.length);
window.__fp_hash = djb2(data);
console.log("hash", window.__fp_hash);
