#include <math.h>
#include <stdio.h>
#include <string.h>

#include "finkey.h"

#define CHECK(cond)                                                      \
    do {                                                                 \
        if (!(cond)) {                                                   \
            const char *e = finkey_last_error();                         \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,       \
                    e ? e : "no error");                                 \
            return 1;                                                    \
        }                                                                \
    } while (0)

int main(int argc, char **argv) {
    FinkeyDevice dev = finkey_device_default(1000000000000ULL, 30.0);
    FinkeyEvaluator *ev = NULL;
    CHECK(finkey_evaluator_new(FINKEY_PROTOCOL_SCS, &dev, FINKEY_MODE_EXACT, &ev) == FINKEY_STATUS_OK);

    FinkeyParams params = {0.02019, NAN, 0.215, NAN, NAN};
    FinkeyResult *r = NULL;
    CHECK(finkey_evaluate(ev, &params, &r) == FINKEY_STATUS_OK);
    double raw = finkey_result_raw_bits(r);
    CHECK(fabs(raw - 97500677.372837658) < 1e-6 * raw);
    CHECK(finkey_result_rate(r) > 0.0);
    CHECK((finkey_result_clamps(r) & FINKEY_CLAMP_KEY_FLOOR) == 0);

    double leak = 0.0;
    CHECK(finkey_result_term(r, "ec_leak", &leak) == FINKEY_STATUS_OK && leak > 0.0);
    CHECK(finkey_result_term(r, "nonsense", &leak) == FINKEY_STATUS_INVALID_ARGUMENT);
    CHECK(strstr(finkey_last_error(), "nonsense") != NULL);
    finkey_result_free(r);
    finkey_evaluator_free(ev);

    dev.e_d = -1.0;
    CHECK(finkey_evaluator_new(FINKEY_PROTOCOL_NPP, &dev, FINKEY_MODE_EXACT, &ev) != FINKEY_STATUS_OK);
    CHECK(finkey_evaluator_new(FINKEY_PROTOCOL_NPP, NULL, FINKEY_MODE_EXACT, &ev) == FINKEY_STATUS_NULL_POINTER);

    double lng = 0.0;
    CHECK(finkey_ln_g(1000000000000ULL, 64, FINKEY_MODE_EXACT, &lng) == FINKEY_STATUS_OK);
    CHECK(fabs(lng - 1539.745) < 1e-3);

    dev = finkey_device_default(1, 0.0);
    double distances[] = {0.0, 50.0};
    uint64_t counts[] = {1000000000000ULL};
    FinkeySweep *s = NULL;
    CHECK(finkey_sweep(FINKEY_PROTOCOL_SCS, &dev, FINKEY_MODE_EXACT, distances, 2, counts, 1, true, &s) == FINKEY_STATUS_OK);
    CHECK(finkey_sweep_len(s) == 4);
    CHECK(finkey_result_rate(finkey_sweep_get(s, 0)) <= finkey_result_rate(finkey_sweep_get(s, 1)));
    CHECK(finkey_sweep_get(s, 4) == NULL);
    if (argc > 1) {
        CHECK(finkey_sweep_write_csv(s, argv[1]) == FINKEY_STATUS_OK);
    }
    finkey_sweep_free(s);

    printf("finkey %s ok\n", finkey_version());
    return 0;
}
