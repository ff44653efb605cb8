#include <math.h>
#include <stdio.h>
#include <string.h>

#include "pcresample.h"

#define N 200

int main(void) {
    double xyz[3 * N];
    for (int i = 0; i < N; i++) {
        double z = 1.0 - 2.0 * (i + 0.5) / N;
        double r = sqrt(1.0 - z * z);
        double t = 2.399963229728653 * i;
        xyz[3 * i] = 0.5 + 2.0 * r * cos(t);
        xyz[3 * i + 1] = -1.0 + 2.0 * r * sin(t);
        xyz[3 * i + 2] = 3.0 + 2.0 * z;
    }
    PcrCloud *cloud = NULL;
    if (pcr_cloud_from_xyz(xyz, N, NULL, 0, &cloud) != PCR_STATUS_OK) return 1;
    if (pcr_cloud_len(cloud) != N) return 2;

    PcrSphere s;
    if (pcr_fit_sphere(cloud, &s) != PCR_STATUS_OK) return 3;
    if (fabs(s.radius - 2.0) > 1e-9 || fabs(s.center[2] - 3.0) > 1e-9) return 4;

    PcrParams p = pcr_params_default();
    PcrDistribution *d = NULL;
    if (pcr_distribution(cloud, PCR_STRATEGY_HIGHPASS, &p, &d) != PCR_STATUS_OK) return 5;
    double probs[N];
    if (pcr_distribution_probs(d, probs, N) != PCR_STATUS_OK) return 6;
    double total = 0.0;
    for (int i = 0; i < N; i++) total += probs[i];
    if (fabs(total - 1.0) > 1e-12) return 7;

    size_t idx[20];
    double w[20];
    if (pcr_sample(d, 20, 42, idx, w) != PCR_STATUS_OK) return 8;
    for (int i = 0; i < 20; i++)
        if (idx[i] >= N) return 9;

    if (pcr_distribution(cloud, 99, &p, &d) != PCR_STATUS_INVALID_ARGUMENT) return 10;
    if (strlen(pcr_last_error()) == 0) return 11;

    pcr_distribution_free(d);
    pcr_cloud_free(cloud);
    printf("ok %s\n", pcr_version());
    return 0;
}
