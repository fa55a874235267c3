/* Plans and validates an extraction on a shipped fixture through the C ABI.
 *
 *   cc -Icrates/ffi/include crates/ffi/examples/smoke.c \
 *      target/release/libstackpick_ffi.a -lm -lpthread -ldl -o smoke
 *   ./smoke fixtures/structured-demo.obs.json fixtures/structured-demo.scene.json r0c0
 */
#include <stdio.h>
#include <stdlib.h>

#include "stackpick.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    rewind(f);
    char *buf = malloc((size_t)n + 1);
    size_t got = fread(buf, 1, (size_t)n, f);
    buf[got] = '\0';
    fclose(f);
    return buf;
}

static int die(const char *what, SpStatus st) {
    const char *msg = sp_last_error_message();
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)st, msg ? msg : "?");
    return 2;
}

int main(int argc, char **argv) {
    if (argc != 4) {
        fprintf(stderr, "usage: %s OBS.json SCENE.json TARGET\n", argv[0]);
        return 2;
    }
    char *obs_text = slurp(argv[1]);
    char *scene_text = slurp(argv[2]);
    if (!obs_text || !scene_text) {
        fprintf(stderr, "cannot read inputs\n");
        return 2;
    }

    SpObservation *obs = NULL;
    SpScene *scene = NULL;
    SpPlan *plan = NULL;
    SpStatus st;
    if ((st = sp_observation_from_json(obs_text, &obs)) != SP_STATUS_OK) return die("observation", st);
    if ((st = sp_scene_from_json(scene_text, &scene)) != SP_STATUS_OK) return die("scene", st);
    if ((st = sp_plan_extraction(obs, NULL, argv[3], SP_APPROACH_PHYSICS, 10, &plan)) != SP_STATUS_OK)
        return die("plan", st);

    bool ok = false;
    char *report = NULL;
    if ((st = sp_validate_plan(scene, plan, NULL, &ok, &report)) != SP_STATUS_OK) return die("validate", st);
    printf("actions %zu success %d\n", sp_plan_len(plan), (int)ok);

    sp_string_free(report);
    sp_plan_free(plan);
    sp_scene_free(scene);
    sp_observation_free(obs);
    free(obs_text);
    free(scene_text);
    return ok ? 0 : 1;
}
