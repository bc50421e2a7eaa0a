#ifndef STATS_H
#define STATS_H

#define MAX_ITEMS 16
#define LIMIT (MAX_ITEMS * 4)

struct table {
    int items[MAX_ITEMS];
    unsigned int len;
};

typedef struct table table_t;

extern int call_count;

int clamp(int v, int lo, int hi);
int get(const table_t *t, unsigned int i);
long sum(const table_t *t);
int max(const table_t *t);
long stats(const table_t *t, int *out_max);

#endif
