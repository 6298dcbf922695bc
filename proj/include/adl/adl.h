/* adelite C interface.
 *
 * A store handle owns one open store directory (and its lock) together with
 * the engine, the workspace layer and the process layer on top of it. Every
 * call that changes the store runs as one transaction. Calls fill an
 * adl_result with output lines (plain text and a JSON object per line),
 * the side-effect trace and a message; free it with adl_result_free.
 */
#ifndef ADL_ADL_H
#define ADL_ADL_H

#include <stddef.h>

#if defined(__GNUC__)
#define ADL_API __attribute__((visibility("default")))
#else
#define ADL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct adl_store adl_store;
typedef struct adl_result adl_result;

typedef enum adl_status {
  ADL_OK = 0,
  ADL_ERR_DOMAIN = 1,  /* bad input or violated model rule */
  ADL_ERR_ABORTED = 2, /* the transaction aborted and rolled back */
  ADL_ERR_USAGE = 3,   /* malformed call */
  ADL_ERR_IO = 4       /* filesystem, persistence or lock failure */
} adl_status;

typedef struct adl_proc_request {
  const char* type;
  const char* user;    /* NULL: the store user */
  const char* const* objects;
  size_t n_objects;
  const char* name;    /* NULL: generated */
  const char* parent;  /* NULL or enclosing process instance */
  const char* role;    /* role of parent, required with parent */
  const char* const* tools;
  size_t n_tools;
} adl_proc_request;

ADL_API const char* adl_version(void);

/* Store lifecycle. `err` may be NULL. */
ADL_API adl_status adl_init(const char* dir, adl_result** out);
ADL_API adl_status adl_open(const char* dir, const char* user, adl_store** store,
                            adl_result** err);
ADL_API void adl_close(adl_store* store);
ADL_API adl_status adl_digest(adl_store* s, adl_result** out);

/* Schema and objects */
ADL_API adl_status adl_load_file(adl_store* s, const char* path, adl_result** out);
ADL_API adl_status adl_load_text(adl_store* s, const char* text, adl_result** out);
ADL_API adl_status adl_new(adl_store* s, const char* name, const char* type,
                           const char* partition, adl_result** out);
ADL_API adl_status adl_mkrel(adl_store* s, const char* origin, const char* rel,
                             const char* dest, adl_result** out);
ADL_API adl_status adl_set(adl_store* s, const char* target, const char* attr,
                           const char* value, adl_result** out);
ADL_API adl_status adl_get(adl_store* s, const char* target, const char* attr,
                           adl_result** out);
ADL_API adl_status adl_invoke(adl_store* s, const char* target, const char* method, size_t argc,
                              const char* const* argv, adl_result** out);
ADL_API adl_status adl_history(adl_store* s, const char* target, const char* attr,
                               int with_dates, adl_result** out);

/* Configurations */
ADL_API adl_status adl_build_sm(adl_store* s, const char* name, const char* root,
                                const char* where, adl_result** out);
ADL_API adl_status adl_bind(adl_store* s, const char* sm, const char* name, const char* select,
                            adl_result** out);
ADL_API adl_status adl_sm_check(adl_store* s, const char* sm, adl_result** out);

/* Contexts and workspaces. `link_mode` is "static" or "dynamic". */
ADL_API adl_status adl_ctx_new(adl_store* s, const char* name, size_t n,
                               const char* const* roots, adl_result** out);
ADL_API adl_status adl_ctx_show(adl_store* s, const char* name, adl_result** out);
ADL_API adl_status adl_checkout(adl_store* s, const char* ws, const char* ctx, const char* dir,
                                const char* link_mode, size_t n, const char* const* linked,
                                adl_result** out);
ADL_API adl_status adl_checkin(adl_store* s, size_t n, const char* const* paths, int force,
                               adl_result** out);
ADL_API adl_status adl_sync(adl_store* s, const char* dir, int to_db, adl_result** out);
ADL_API adl_status adl_resolve(adl_store* s, const char* path, adl_result** out);

/* Processes */
ADL_API adl_status adl_proc_new(adl_store* s, const adl_proc_request* req, adl_result** out);
ADL_API adl_status adl_we_invoke(adl_store* s, const char* we, const char* role,
                                 const char* object, const char* method, size_t argc,
                                 const char* const* argv, adl_result** out);
ADL_API adl_status adl_we_set(adl_store* s, const char* we, const char* role, const char* object,
                              const char* attr, const char* value, adl_result** out);
ADL_API adl_status adl_we_get(adl_store* s, const char* we, const char* role, const char* object,
                              const char* attr, adl_result** out);
ADL_API adl_status adl_we_status(adl_store* s, const char* we, adl_result** out);
ADL_API adl_status adl_inbox(adl_store* s, const char* user, adl_result** out);

/* Logs. `tail` 0 returns every line. */
ADL_API adl_status adl_event_log(adl_store* s, size_t tail, adl_result** out);
ADL_API adl_status adl_tx_last(adl_store* s, adl_result** out);

/* Results */
ADL_API adl_status adl_result_status(const adl_result* r);
ADL_API const char* adl_result_message(const adl_result* r);
ADL_API size_t adl_result_count(const adl_result* r);
ADL_API const char* adl_result_line(const adl_result* r, size_t i);
ADL_API const char* adl_result_json(const adl_result* r, size_t i);
ADL_API size_t adl_result_trace_count(const adl_result* r);
ADL_API const char* adl_result_trace(const adl_result* r, size_t i);
ADL_API void adl_result_free(adl_result* r);

#ifdef __cplusplus
}
#endif

#endif
