printf("a;b;%d", value);
