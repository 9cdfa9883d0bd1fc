/* Builds a small energy, minimizes it and checks the result by enumeration.
 *
 *   cc minimize.c -I../include -L<target>/debug -lsos_ffi -o minimize
 */
#include <stdio.h>

#include "sos_ffi.h"

static int check(SosStatus s, const char *what) {
    if (s != SOS_STATUS_OK) {
        fprintf(stderr, "%s: status %d: %s\n", what, (int)s, sos_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    SosEnergy *e = NULL;
    if (check(sos_energy_new(4, &e), "new")) return 1;
    if (check(sos_energy_set_unary(e, 0, 0.0, 3.0), "unary")) return 1;
    if (check(sos_energy_set_unary(e, 3, 2.0, 0.0), "unary")) return 1;

    /* Penalize disagreement in the 3-clique {0, 1, 2}. */
    size_t members[3] = {0, 1, 2};
    double table[8] = {0, 2, 2, 2, 2, 2, 2, 0};
    if (check(sos_energy_add_clique(e, members, 3, table, 8, NULL), "clique")) return 1;
    size_t pair[2] = {2, 3};
    double cut[4] = {0, 1, 1, 0};
    if (check(sos_energy_add_clique(e, pair, 2, cut, 4, NULL), "clique")) return 1;

    double flow_min = 0, exact_min = 0;
    uint8_t labels[4], exact[4];
    if (check(sos_energy_minimize(e, &flow_min, labels, 4), "minimize")) return 1;
    if (check(sos_energy_brute_force(e, &exact_min, exact, 4), "brute force")) return 1;
    double at = 0;
    if (check(sos_energy_evaluate(e, labels, 4, &at), "evaluate")) return 1;

    printf("min %g labels %d%d%d%d\n", flow_min, labels[0], labels[1], labels[2], labels[3]);

    /* A supermodular table is rejected with a message. */
    double bad[4] = {0, 0, 0, 1};
    size_t p01[2] = {0, 1};
    sos_energy_add_clique(e, p01, 2, bad, 4, NULL);
    SosStatus s = sos_energy_minimize(e, &flow_min, labels, 4);
    printf("supermodular: status %d\n", (int)s);

    sos_energy_free(e);
    return (exact_min == at && s == SOS_STATUS_NOT_SUBMODULAR) ? 0 : 2;
}
