#include <stdio.h>
int main(void)
{
    int a, b;
    scanf("%d %d", &a, &b);
    int q = a / b;
    if (q * b < a)
        printf("%d\n", q + 1);
    else
        printf("%d\n", q);
    return 0;
}
