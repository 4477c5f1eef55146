// Local address discovery through ICE candidates.
var seen = [];
var pc = new RTCPeerConnection({ iceServers: [] });
pc.createDataChannel("probe");
pc.onicecandidate = function (event) {
  if (!event || !event.candidate) {
    console.log("candidates", seen.length);
    window.__fp_hash = seen.join(";");
    pc.close();
    return;
  }
  var parts = event.candidate.candidate.split(" ");
  seen.push(parts[4]);
};
pc.createOffer().then(function (offer) {
  return pc.setLocalDescription(offer);
}).then(function () {
  console.log("offer set");
});
