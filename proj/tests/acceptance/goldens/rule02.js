var arg0 = "6 * 7";
var answer = eval(arg0);
var decoded = atob("aGk=");
