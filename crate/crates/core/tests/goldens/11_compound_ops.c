x <<= 2;
y |= mask;
z %= 7;
count -= 1;
