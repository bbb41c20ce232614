char *p = malloc(size + 1);
