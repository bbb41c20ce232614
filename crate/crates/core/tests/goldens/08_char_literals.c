if (c == ';') c = '\n';
