var c = document.createElement("canvas");
