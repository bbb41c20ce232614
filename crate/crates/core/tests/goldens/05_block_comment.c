/* free(p);
   p = NULL; */
total += count; /* inline */ log_value(total);
