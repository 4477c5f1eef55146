const arrName = [3, 1, 4, 1, 5];
const weights = [0.5, 1.25, -2.75];
