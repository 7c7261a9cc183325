/* Copyright 2026 The ionspam Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include <math.h>
#include <stdio.h>

#include "ionspam.h"

int main(void) {
  IonspamSpecies *ba = NULL;
  if (ionspam_species_builtin("137Ba+", &ba) != IONSPAM_STATUS_OK) {
    fprintf(stderr, "lookup: %s\n", ionspam_last_error());
    return 1;
  }
  double eps = 0.0;
  if (ionspam_species_prep_error(ba, &eps) != IONSPAM_STATUS_OK || fabs(eps - 1.1e-5) > 5e-7) {
    fprintf(stderr, "eps %g\n", eps);
    return 1;
  }
  double errors[36];
  size_t written = 0;
  if (ionspam_simulate_prep(ba, IONSPAM_PROTOCOL_MAOP, 35, 0, true, errors, 36, &written) !=
          IONSPAM_STATUS_OK ||
      written != 36) {
    fprintf(stderr, "prep: %s\n", ionspam_last_error());
    return 1;
  }
  ionspam_species_free(ba);

  IonspamSpecies *missing = NULL;
  if (ionspam_species_builtin("nope", &missing) != IONSPAM_STATUS_UNKNOWN_SPECIES ||
      ionspam_last_error() == NULL) {
    return 1;
  }

  IonspamDetector *det = NULL;
  ionspam_detector_new(&det);
  uint32_t counts[10] = {0};
  IonspamReadout label = IONSPAM_READOUT_BRIGHT;
  if (ionspam_classify_bayes(det, counts, 10, &label, NULL, NULL) != IONSPAM_STATUS_OK ||
      label != IONSPAM_READOUT_DARK) {
    return 1;
  }
  ionspam_detector_free(det);
  printf("ok\n");
  return 0;
}
