#include <stdio.h>
#include <string.h>

#include "magnitude.h"

static const char *MODEL =
    "model \"decay\" { time 0 .. 4 dt 1 }\n"
    "const k = 0.5\n"
    "stock s init 8 outflow drain\n"
    "aux drain = k * s\n";

int main(void) {
    MagModel *model = NULL;
    if (mag_model_parse(MODEL, NULL, &model) != MAG_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", mag_last_error_message());
        return 1;
    }
    MagRunResult *run = NULL;
    if (mag_run(model, NULL, NULL, &run) != MAG_STATUS_OK) {
        fprintf(stderr, "run: %s\n", mag_last_error_message());
        return 1;
    }
    double s[5];
    size_t n = 0;
    if (mag_run_result_series(run, "s", s, 5, &n) != MAG_STATUS_OK || n != 5 || s[4] != 0.5) {
        return 1;
    }
    char *csv = NULL;
    mag_run_result_to_csv(run, &csv);
    printf("%s", csv);
    mag_string_free(csv);

    MagRunResult *none = NULL;
    int status = mag_run(model, "missing", NULL, &none);
    mag_run_result_free(run);
    mag_model_free(model);
    return status == MAG_STATUS_NOT_FOUND ? 0 : 1;
}
