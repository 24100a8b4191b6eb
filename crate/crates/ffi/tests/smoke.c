#include <math.h>
#include <stdio.h>
#include "parallel_cbf.h"

static const char *SCENARIO =
    "name = \"c\"\n"
    "system = \"unicycle\"\n"
    "filter = \"parallel_pair\"\n"
    "x0 = [0.0, 0.0, 0.0, 0.0]\n"
    "[gains]\nchain = [1.0]\n"
    "[sim]\nhorizon = 3.0\n"
    "[nominal]\nkind = \"proportional_speed\"\nv_ref = 2.0\n";

int main(void) {
    double a[2] = {1.0, 1.0}, u0[2] = {0.0, 0.0}, u[2];
    PcbfBranch branch;
    if (pcbf_solve_closed_form(a, 2, 2.0, 5.0, u0, 0.0, u, &branch, NULL) != PCBF_STATUS_OK) return 1;
    if (branch != PCBF_BRANCH_LOWER_CLAMPED || u[0] != 1.0 || u[1] != 1.0) return 2;

    PcbfScenario *scenario = NULL;
    PcbfRun *run = NULL;
    if (pcbf_scenario_from_toml(SCENARIO, &scenario) != PCBF_STATUS_OK) {
        fprintf(stderr, "%s\n", pcbf_last_error_message());
        return 3;
    }
    if (pcbf_scenario_run(scenario, &run) != PCBF_STATUS_OK) return 4;
    PcbfEvent kind;
    double t_event;
    pcbf_run_event(run, &kind, &t_event);
    if (kind != PCBF_EVENT_COMPLETED || pcbf_run_len(run) != 3001) return 5;
    double h[2], hbar[2];
    for (size_t k = 0; k < pcbf_run_len(run); ++k) {
        pcbf_run_sample(run, k, NULL, NULL, NULL, h, hbar);
        if (h[0] < 0.0 || hbar[0] < 0.0) return 6;
    }
    if (pcbf_run_sample(run, 5000, NULL, NULL, NULL, NULL, NULL) != PCBF_STATUS_OUT_OF_RANGE) return 7;
    pcbf_run_free(run);
    pcbf_scenario_free(scenario);
    printf("ok %s\n", pcbf_version());
    return 0;
}
