void sum_three(int a, int b, int c, int* result)
{
    *result = a + b + c; /* fixture: verifies */
}
