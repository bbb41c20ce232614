if (a <= b && c >= d) check(a != c);
