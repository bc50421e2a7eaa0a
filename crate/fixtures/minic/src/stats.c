#include "stats.h"

int call_count = 0;

int clamp(int v, int lo, int hi)
{
    if (v < lo)
        return lo;
    if (v > hi)
        return hi;
    return v;
}

int get(const table_t *t, unsigned int i)
{
    call_count++;
    if (i >= t->len)
        return 0;
    return clamp(t->items[i], -LIMIT, LIMIT);
}

long sum(const table_t *t)
{
    long total = 0;
    unsigned int i;
    for (i = 0; i < t->len; i++) {
        total += get(t, i);
    }
    return total;
}

int max(const table_t *t)
{
    int best = get(t, 0);
    unsigned int i = 1;
    while (i < t->len) {
        int v = get(t, i);
        if (v > best)
            best = v;
        i++;
    }
    return best;
}

long stats(const table_t *t, int *out_max)
{
    if (out_max != NULL)
        *out_max = max(t);
    return sum(t);
}
