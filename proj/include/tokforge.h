#ifndef TOKFORGE_H
#define TOKFORGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(TOKFORGE_BUILDING)
#define TF_API __attribute__((visibility("default")))
#else
#define TF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tf_tokenizer tf_tokenizer;

typedef enum tf_status {
  TF_OK = 0,
  TF_ERR_INVALID_ARGUMENT,
  TF_ERR_IO,
  TF_ERR_FORMAT,
  TF_ERR_UNSUPPORTED_MODEL,
  TF_ERR_INCONSISTENT_MODEL,
  TF_ERR_UNKNOWN_ATOM,
  TF_ERR_UNKNOWN_ID,
  TF_ERR_TARGET_TOO_SMALL,
  TF_ERR_EXHAUSTED,
  TF_ERR_EMPTY_CORPUS,
  TF_ERR_DEGENERATE_DISTRIBUTION,
  TF_ERR_EMPTY_SET,
  TF_ERR_UNTOKENIZABLE,
  TF_ERR_DIM_MISMATCH,
  TF_ERR_NOT_A_LEAF,
  TF_ERR_INTERNAL
} tf_status;

/* Message of the last failed call on this thread ("" if none). */
TF_API const char* tf_last_error(void);
TF_API const char* tf_status_name(tf_status status);
TF_API const char* tf_version(void);

/* Strings and id arrays returned by the library are released with these. */
TF_API void tf_string_free(char* s);
TF_API void tf_ids_free(uint32_t* ids);
TF_API void tf_floats_free(float* values);

typedef enum tf_mode { TF_MODE_BYTE_LEVEL = 0, TF_MODE_SENTENCEPIECE = 1 } tf_mode;

typedef enum tf_corpus_format { TF_CORPUS_LINES = 0, TF_CORPUS_JSONL = 1 } tf_corpus_format;

typedef struct tf_corpus_options {
  const char* path; /* "-" for stdin; ".gz" is read as gzip */
  tf_corpus_format format;
  int has_budget;
  uint64_t budget_chars; /* code points; cut after the crossing document */
  uint64_t seed;         /* 0 keeps file order, otherwise shuffles */
} tf_corpus_options;

TF_API void tf_corpus_options_init(tf_corpus_options* options);

typedef struct tf_trainer_options {
  tf_mode mode; /* tf_train only; extension uses the model's mode */
  uint64_t min_pair_frequency;
  /* -1: mode default (training) or the model's bound (extension);
      0: unbounded; >0: bound in atomic units */
  int64_t max_token_length;
  int character_coverage;
} tf_trainer_options;

TF_API void tf_trainer_options_init(tf_trainer_options* options, tf_mode mode);

/* Tokenizer files */
TF_API tf_status tf_load(const char* path, tf_tokenizer** out);
TF_API tf_status tf_load_json(const char* json, size_t length, tf_tokenizer** out);
TF_API tf_status tf_save(const tf_tokenizer* tok, const char* path);
TF_API tf_status tf_to_json(const tf_tokenizer* tok, char** out);
TF_API void tf_free(tf_tokenizer* tok);
TF_API size_t tf_vocab_size(const tf_tokenizer* tok);

/* Tokenization. merge_skipping: -1 follows the model flag (same as 1),
   0 disables skipping. */
TF_API tf_status tf_encode(const tf_tokenizer* tok, const char* text, size_t length, int merge_skipping,
                           uint32_t** ids, size_t* count);
TF_API tf_status tf_decode(const tf_tokenizer* tok, const uint32_t* ids, size_t count, char** text);

/* Training and extension. Reports are JSON objects. */
TF_API tf_status tf_train(const tf_corpus_options* corpus, const tf_trainer_options* options,
                          size_t target_vocab_size, tf_tokenizer** out, char** report);

TF_API tf_status tf_extend_continued(const tf_tokenizer* base, const tf_corpus_options* corpus, size_t n_new,
                                     const tf_trainer_options* options, tf_tokenizer** out, char** report);

typedef enum tf_naive_strategy { TF_NAIVE_REGEN = 0, TF_NAIVE_APPEND = 1 } tf_naive_strategy;

/* aux may be NULL: the auxiliary tokenizer is then trained on the corpus. */
TF_API tf_status tf_extend_naive(const tf_tokenizer* base, const tf_tokenizer* aux, const tf_corpus_options* corpus,
                                 size_t n_new, tf_naive_strategy strategy, const tf_trainer_options* options,
                                 tf_tokenizer** out, char** report);

/* Pruning. corpus may be NULL for TF_PRUNE_LAST_ID. The order report lists
   the full prune order and the tokens made unreachable by the removal. */
typedef enum tf_prune_method {
  TF_PRUNE_LEAF_FREQ = 0,
  TF_PRUNE_MERGE_BASED = 1,
  TF_PRUNE_NAIVE_FREQ = 2,
  TF_PRUNE_LAST_ID = 3
} tf_prune_method;

TF_API tf_status tf_prune(const tf_tokenizer* tok, tf_prune_method method, const tf_corpus_options* corpus, size_t k,
                          tf_tokenizer** out, char** order_report);

/* Analysis */
TF_API tf_status tf_stt(const tf_tokenizer* tok, char** report);

enum {
  TF_METRIC_COMPRESSION = 1,
  TF_METRIC_RENYI = 2,
  TF_METRIC_UNUSED = 4,
  TF_METRIC_STT = 8
};

typedef struct tf_eval_options {
  unsigned metrics;             /* TF_METRIC_* bits */
  double alpha;                 /* Renyi order, default 2.5 */
  int observed_denominator;     /* log of observed types instead of log |V| */
  const uint32_t* added;        /* ids for TF_METRIC_UNUSED */
  size_t added_count;
  int unused_merge_skipping;    /* -1 model flag, 0 off, 1 on */
} tf_eval_options;

TF_API void tf_eval_options_init(tf_eval_options* options);

/* corpus may be NULL when only TF_METRIC_STT is requested. */
TF_API tf_status tf_evaluate(const tf_tokenizer* tok, const tf_corpus_options* corpus,
                             const tf_eval_options* options, char** report);

/* CSV with header "id,token,count". subset may be NULL. */
TF_API tf_status tf_histogram(const tf_tokenizer* tok, const tf_corpus_options* corpus, const uint32_t* subset,
                              size_t subset_count, char** csv);

/* Fast Vocabulary Transfer. */
TF_API tf_status tf_fvt_transfer(const tf_tokenizer* old_tok, const tf_tokenizer* new_tok, const float* old_data,
                                 size_t rows, size_t cols, float** new_data, size_t* new_rows);
TF_API tf_status tf_fvt_transfer_files(const tf_tokenizer* old_tok, const tf_tokenizer* new_tok,
                                       const char* old_embeddings_path, const char* out_path);

/* Vocabulary, merges and (optionally) merge-graph summary as JSON. */
TF_API tf_status tf_inspect(const tf_tokenizer* tok, int include_graph, char** report);

#ifdef __cplusplus
}
#endif

#endif
