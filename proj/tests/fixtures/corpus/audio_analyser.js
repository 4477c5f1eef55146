// Oscillator through an analyser node.
var AC = window.AudioContext || window.webkitAudioContext;
var actx = new AC();
var oscillator = actx.createOscillator();
var analyser = actx.createAnalyser();
var gain = actx.createGain();
oscillator.type = "square";
oscillator.frequency.setValueAtTime(440, actx.currentTime);
gain.gain.setValueAtTime(0, actx.currentTime);
oscillator.connect(analyser);
analyser.connect(gain);
gain.connect(actx.destination);
oscillator.start(0);
var bins = new Float32Array(analyser.frequencyBinCount);
analyser.getFloatFrequencyData(bins);
var acc = 0;
for (let b = 0; b < 32; b++) {
  acc = acc + 1;
}
var total = 0;
var k = 0;
while (k < bins.length) {
  total += bins[k];
  k++;
}
console.log("bins", acc, total.toFixed(4));
window.__fp_hash = String(total);
actx.close();
