struct node *next_node(struct node *n);
x = a * f(b);
