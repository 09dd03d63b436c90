#ifndef DROIDREPRO_H
#define DROIDREPRO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DrStatus {
  DR_STATUS_OK = 0,
  DR_STATUS_NULL_ARGUMENT = 1,
  DR_STATUS_INVALID_UTF8 = 2,
  // A file could not be read or parsed.
  DR_STATUS_LOAD = 3,
  // A JSON argument or configuration value was rejected.
  DR_STATUS_INVALID_INPUT = 4,
  // The device refused the operation.
  DR_STATUS_DEVICE = 5,
  // The oracle found no path to the bug.
  DR_STATUS_UNREACHABLE = 6,
  // A Rust panic was caught at the boundary.
  DR_STATUS_PANIC = 7,
} DrStatus;

typedef enum DrOutcomeKind {
  DR_OUTCOME_KIND_SUCCESS = 0,
  DR_OUTCOME_KIND_BUDGET_EXCEEDED_ACTIONS = 1,
  DR_OUTCOME_KIND_BUDGET_EXCEEDED_TIME = 2,
  DR_OUTCOME_KIND_EXHAUSTED = 3,
  DR_OUTCOME_KIND_ERROR = 4,
} DrOutcomeKind;

// A loaded simulated app. Immutable and shareable between devices.
typedef struct DrApp DrApp;

// One device session. Not thread-safe; serialize calls on a handle.
typedef struct DrDevice DrDevice;

// The result of one reproduction session.
typedef struct DrOutcome DrOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a
// successful one. Valid until the next call on this thread.
const char *dr_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void dr_string_free(char *s);

// Loads a simulated app description from a JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DrStatus dr_app_load(const char *path, struct DrApp **out);

// # Safety
// `app` must come from [`dr_app_load`] and not have been freed. Null is ignored.
void dr_app_free(struct DrApp *app);

// Shortest action sequence reaching the bug, as a JSON action list.
// `bug_id` may be null to use the app's ground-truth bug.
//
// # Safety
// Pointers must be valid; `bug_id` may be null.
enum DrStatus dr_app_oracle(const struct DrApp *app,
                            const char *bug_id,
                            uint32_t max_depth,
                            char **out_json);

// Opens a fresh device session on `app`. Returns null if `app` is null.
//
// # Safety
// `app` must be a live handle. The device keeps its own reference, so the
// app may be freed first.
struct DrDevice *dr_device_new(const struct DrApp *app);

// # Safety
// `device` must come from [`dr_device_new`] and not have been freed. Null is ignored.
void dr_device_free(struct DrDevice *device);

// Relaunches the app and clears any pending crash.
//
// # Safety
// `device` must be a live handle.
enum DrStatus dr_device_reset(struct DrDevice *device);

// Textual description of the current screen.
//
// # Safety
// `device` must be a live handle; `out` must be writable.
enum DrStatus dr_device_screen(struct DrDevice *device, char **out);

// Actions available on the current screen, as a JSON action list.
//
// # Safety
// `device` must be a live handle; `out_json` must be writable.
enum DrStatus dr_device_actions(struct DrDevice *device, char **out_json);

// Executes one JSON-encoded action. `crashed` receives 1 if the app
// crashed; `crash_log` (may be null) receives the crash record or null.
//
// # Safety
// `device` must be a live handle, `action_json` a NUL-terminated string
// and `crashed` writable.
enum DrStatus dr_device_execute(struct DrDevice *device,
                                const char *action_json,
                                int32_t *crashed,
                                char **crash_log);

// Saves the current position; `out` receives a token for [`dr_device_rollback`].
//
// # Safety
// `device` must be a live handle; `out` must be writable.
enum DrStatus dr_device_snapshot(struct DrDevice *device, uint64_t *out);

// Restores a position saved by [`dr_device_snapshot`] on the same device.
//
// # Safety
// `device` must be a live handle.
enum DrStatus dr_device_rollback(struct DrDevice *device, uint64_t token);

// Replays a JSON action list from a reset and reports whether a bug
// shows. `evidence` may be null.
//
// # Safety
// `device` must be a live handle, `trace_json` a NUL-terminated string and
// `confirmed` writable.
enum DrStatus dr_device_replay(struct DrDevice *device,
                               const char *trace_json,
                               int32_t *confirmed,
                               char **evidence);

// Runs one reproduction session for the report at `report_path` on a fresh
// device of `app`, answering model prompts from the mock script at
// `mock_path`. Zero `max_actions` or `beam` selects the default.
//
// # Safety
// Pointers must be valid; `out` must be writable.
enum DrStatus dr_reproduce(const char *report_path,
                           const struct DrApp *app,
                           const char *mock_path,
                           uint64_t max_actions,
                           uint32_t beam,
                           struct DrOutcome **out);

// # Safety
// `outcome` must come from [`dr_reproduce`] and not have been freed. Null is ignored.
void dr_outcome_free(struct DrOutcome *outcome);

// # Safety
// `outcome` must be a live handle.
enum DrOutcomeKind dr_outcome_kind(const struct DrOutcome *outcome);

// Device actions executed during the session, probes and replays included.
//
// # Safety
// `outcome` must be a live handle.
uint64_t dr_outcome_actions(const struct DrOutcome *outcome);

// The outcome document as JSON. Nonzero `normalize` zeroes wall times.
//
// # Safety
// `outcome` must be a live handle; `out_json` must be writable.
enum DrStatus dr_outcome_json(const struct DrOutcome *outcome, int32_t normalize, char **out_json);

// The reproducing trace as a JSON action list, or null when the session
// did not succeed.
//
// # Safety
// `outcome` must be a live handle; `out_json` must be writable.
enum DrStatus dr_outcome_trace(const struct DrOutcome *outcome, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DROIDREPRO_H */
