void sum_three(int a, int b, int c, int* result);
