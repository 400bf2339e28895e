/* molecular dynamics fragment */
void kinetic(int n, double *vel, double *mass, double *ke)
{
    int i;
    double e, v2;
    e = 0.0;
    #pragma omp parallel for private(v2) reduction(+:e)
    for (i = 0; i < n; i++) {
        v2 = vel[i] * vel[i];
        e = e + 0.5 * mass[i] * v2;
    }
    ke[0] = e;
}
