/* conjugate gradient fragments */
void conj_grad(int n, double *p, double *q, double *r, double *x, double *z, double alpha)
{
    int j;
    double rho, d, sum;
    rho = 0.0;
    #pragma omp parallel for reduction(+:rho)
    for (j = 0; j < n; j++)
        rho = rho + r[j] * r[j];
    d = 0.0;
    #pragma omp parallel for reduction(+:d)
    for (j = 0; j < n; j++)
        d = d + p[j] * q[j];
    #pragma omp parallel for
    for (j = 0; j < n; j++) {
        z[j] = z[j] + alpha * p[j];
        r[j] = r[j] - alpha * q[j];
    }
    sum = 0.0;
    for (j = 1; j < n; j++)
        x[j] = x[j - 1] + z[j];
}
