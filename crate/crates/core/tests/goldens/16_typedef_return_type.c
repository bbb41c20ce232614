size_t count_items(list_t *list);
total = count_items(list);
