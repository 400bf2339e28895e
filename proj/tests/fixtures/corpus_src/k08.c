/* fixture kernel 8 */
#include <math.h>

void kernel8(void)
{
    int i, j, k, n, m, cnt, bin[64], found, key[64], target, flag[64], ok[64], mask[64];
    double a[64], b[64], c[64], d[64], e[64], f[64], g[64], h[64], p[64], q[64], r[64], s[64], u[64], v[64], w[64], x[64], y[64], z[64];
    double t, sum, best, err, scale, prod, last, tmp, m4[4], res[64], alpha, beta, out[64], in[64];
    double mat[64], bal, cost[64], x2, src[64], dst[64], lo, hist0;
    #pragma omp parallel for lastprivate(last)
    for (i = 0; i < n; i++) {
        last = d[i];
        e[i] = last - 1;
    }
    #pragma omp parallel for private(tmp, k)
    for (i = 0; i < n; i++) {
        tmp = 0.0;
        for (k = 0; k < 4; k++)
            tmp = tmp + m4[k] * v[i];
        res[i] = tmp;
    }
}
