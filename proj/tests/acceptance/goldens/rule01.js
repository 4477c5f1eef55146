let x = 42;
