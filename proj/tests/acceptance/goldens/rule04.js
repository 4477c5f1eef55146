var x = 0;
if (a > b) {
  x = 1;
} else {
  x = 2;
}
