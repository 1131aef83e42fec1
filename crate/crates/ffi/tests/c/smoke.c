#include <stdio.h>
#include <stdlib.h>
#include "usskill.h"

int main(void) {
    UsskillSimulator *sim = NULL;
    if (usskill_simulator_new(&sim) != USSKILL_STATUS_OK) return 10;
    size_t h = 0, w = 0;
    if (usskill_simulator_image_size(sim, &h, &w) != USSKILL_STATUS_OK) return 11;
    float *image = malloc(h * w * sizeof(float));
    double wrench[6];
    uint8_t label = 0;
    UsskillFrame frame;
    usskill_simulator_sample_start(sim, 7, &frame);
    int steps = 0;
    for (; steps < 200 && !label; steps++) {
        UsskillAction a;
        if (usskill_oracle_action(sim, &frame, &a) != USSKILL_STATUS_OK) return 12;
        if (usskill_simulator_step(sim, &frame, &a, &frame) != USSKILL_STATUS_OK) return 13;
        if (usskill_simulator_observe(sim, &frame, image, h * w, wrench, &label) != USSKILL_STATUS_OK) return 14;
    }
    if (usskill_simulator_observe(sim, &frame, image, 3, wrench, &label) != USSKILL_STATUS_SHAPE_MISMATCH) return 15;
    char msg[256];
    usskill_last_error_message(msg, sizeof msg);
    printf("version=%s reached=%d steps=%d fz=%.3f last_error=\"%s\"\n", usskill_version(), label, steps, wrench[2], msg);
    free(image);
    usskill_simulator_free(sim);
    return label ? 0 : 16;
}
