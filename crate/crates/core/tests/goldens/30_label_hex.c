retry:
    n = read(fd, buf, 0x100);
    if (n < 0) goto retry;
