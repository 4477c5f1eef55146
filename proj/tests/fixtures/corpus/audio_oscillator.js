// Offline audio rendering fingerprint.
var ctxClass = window.OfflineAudioContext || window.webkitOfflineAudioContext;
var audio = new ctxClass(1, 5000, 44100);
var osc = audio.createOscillator();
osc.type = "triangle";
osc.frequency.setValueAtTime(10000, 0);
var comp = audio.createDynamicsCompressor();
comp.threshold.setValueAtTime(-50, 0);
comp.knee.setValueAtTime(40, 0);
comp.ratio.setValueAtTime(12, 0);
comp.attack.setValueAtTime(0, 0);
comp.release.setValueAtTime(0.25, 0);
osc.connect(comp);
comp.connect(audio.destination);
osc.start(0);
audio.startRendering().then(function (buffer) {
  var samples = buffer.getChannelData(0);
  var sum = 0;
  for (var i = 4500; i < 5000; i++) {
    sum += Math.abs(samples[i]);
  }
  console.log("audio", sum.toFixed(6));
  window.__fp_hash = sum.toString();
});
