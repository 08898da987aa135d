/* Exercises the C interface through the shared library only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "jumpflow/jumpflow.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void test_version_and_subcommands(void) {
  EXPECT(strlen(jf_version()) > 0);
  EXPECT(jf_subcommand_count() == 6);
  int found = 0;
  for (size_t i = 0; i < jf_subcommand_count(); ++i)
    if (strcmp(jf_subcommand_name(i), "mixing") == 0) found = 1;
  EXPECT(found);
  EXPECT(jf_subcommand_name(99) == NULL);
}

static void test_errors(void) {
  jf_experiment* e = NULL;
  EXPECT(jf_experiment_from_json("{\"bogus\": 1}", &e) == JF_ERR_VALIDATION);
  EXPECT(e == NULL);
  EXPECT(strstr(jf_last_error(), "bogus") != NULL);
  EXPECT(jf_experiment_from_file("/nonexistent/config.json", &e) == JF_ERR_VALIDATION);
  EXPECT(jf_experiment_from_json(NULL, &e) == JF_ERR_VALIDATION);

  EXPECT(jf_experiment_from_json("{}", &e) == JF_OK);
  EXPECT(jf_experiment_run(e, "explode") == JF_ERR_VALIDATION);
  EXPECT(strlen(jf_experiment_summary(e)) == 0);
  jf_experiment_free(e);
  jf_experiment_free(NULL);
}

static void test_experiment_run(void) {
  jf_experiment* e = NULL;
  const char* cfg = "{\"system\": {\"preset\": \"linear1d\"}, \"x0\": [2.0], \"simulate\": {\"k_max\": 3}}";
  EXPECT(jf_experiment_from_json(cfg, &e) == JF_OK);
  EXPECT(jf_experiment_set_seed(e, 99) == JF_OK);
  EXPECT(jf_experiment_set_replicas(e, 50) == JF_OK);
  EXPECT(jf_experiment_set_threads(e, 2) == JF_OK);
  EXPECT(jf_experiment_set_output(e, "capi_out") == JF_OK);
  EXPECT(strstr(jf_experiment_resolved_config(e), "\"seed\": 99") != NULL);
  EXPECT(jf_experiment_run(e, "simulate") == JF_OK);
  EXPECT(strstr(jf_experiment_summary(e), "simulate") != NULL);
  FILE* f = fopen("capi_out/moments_embedded.csv", "r");
  EXPECT(f != NULL);
  if (f) fclose(f);
  jf_experiment_free(e);
}

static void test_system(void) {
  jf_system* s = NULL;
  EXPECT(jf_system_from_json("{\"preset\": \"linear1d\", \"alpha\": 1.0}", &s) == JF_OK);
  EXPECT(jf_system_state_dim(s) == 1);
  EXPECT(jf_system_noise_dim(s) == 1);
  double x = 1.0, y = 0.0;
  EXPECT(jf_system_flow(s, &x, log(2.0), &y) == JF_OK);
  EXPECT(fabs(y - 0.5) < 1e-8);
  EXPECT(jf_system_flow(s, &x, -1.0, &y) == JF_ERR_VALIDATION);

  double a[4], b[4];
  EXPECT(jf_system_embedded_chain(s, &x, 4, 3, 0, a) == JF_OK);
  EXPECT(jf_system_embedded_chain(s, &x, 4, 3, 0, b) == JF_OK);
  EXPECT(memcmp(a, b, sizeof a) == 0);
  jf_system_free(s);

  EXPECT(jf_system_from_json("{\"preset\": \"nope\"}", &s) == JF_ERR_VALIDATION);
}

static void test_kalman(void) {
  /* A = [[0, 1], [-1, 0]], B = (0, 1)^T, column-major. */
  const double a[4] = {0.0, -1.0, 1.0, 0.0};
  const double b[2] = {0.0, 1.0};
  const double zero[2] = {0.0, 0.0};
  int rank = -1;
  EXPECT(jf_kalman_rank(a, b, 2, 1, &rank) == JF_OK);
  EXPECT(rank == 2);
  EXPECT(jf_kalman_rank(a, zero, 2, 1, &rank) == JF_OK);
  EXPECT(rank == 0);
  EXPECT(jf_kalman_rank(a, b, 0, 1, &rank) == JF_ERR_VALIDATION);
}

int main(void) {
  test_version_and_subcommands();
  test_errors();
  test_experiment_run();
  test_system();
  test_kalman();
  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return EXIT_FAILURE;
  }
  puts("C API checks passed");
  return EXIT_SUCCESS;
}
