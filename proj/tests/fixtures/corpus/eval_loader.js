// Encoded payload decoded and evaluated at runtime.
var payload = "dmFyIHByb2JlZCA9IG5hdmlnYXRvci5wbGF0Zm9ybTs=";
var code = atob(payload);
window.eval(code);
var shifted = unescape("%6E%61%76");
var doubled = (function (s) { return eval(s); })("2 * 21");
var maker = new Function("a", "b", "return a + '-' + b;");
console.log(probed, shifted, doubled, maker("x", "y"));
window.__fp_hash = maker(probed, doubled);
setTimeout("console.log('delayed', typeof probed)", 5);
