result = compute(parse(input, 10), strlen(name));
