#include <stdio.h>
int main(void)
{
    long long a, b, c;
    scanf("%lld %lld %lld", &a, &b, &c);
    long long best = a;
    if (b > best)
        best = b;
    if (c > best)
        best = c;
    printf("%lld\n", best);
    return 0;
}
