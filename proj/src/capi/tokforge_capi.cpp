#include "tokforge.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "tokforge/analysis.hpp"
#include "tokforge/corpus.hpp"
#include "tokforge/error.hpp"
#include "tokforge/extension.hpp"
#include "tokforge/fvt.hpp"
#include "tokforge/merge_graph.hpp"
#include "tokforge/pruning.hpp"
#include "tokforge/serialization.hpp"
#include "tokforge/trainer.hpp"

struct tf_tokenizer {
  tokforge::TokenizerModel model;
};

namespace {

using json = nlohmann::json;
using namespace tokforge;

thread_local std::string g_last_error;

tf_status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return TF_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return TF_ERR_IO;
    case ErrorCode::Format: return TF_ERR_FORMAT;
    case ErrorCode::UnsupportedModel: return TF_ERR_UNSUPPORTED_MODEL;
    case ErrorCode::InconsistentModel: return TF_ERR_INCONSISTENT_MODEL;
    case ErrorCode::UnknownAtom: return TF_ERR_UNKNOWN_ATOM;
    case ErrorCode::UnknownId: return TF_ERR_UNKNOWN_ID;
    case ErrorCode::TargetTooSmall: return TF_ERR_TARGET_TOO_SMALL;
    case ErrorCode::Exhausted: return TF_ERR_EXHAUSTED;
    case ErrorCode::EmptyCorpus: return TF_ERR_EMPTY_CORPUS;
    case ErrorCode::DegenerateDistribution: return TF_ERR_DEGENERATE_DISTRIBUTION;
    case ErrorCode::EmptySet: return TF_ERR_EMPTY_SET;
    case ErrorCode::UntokenizableNewToken: return TF_ERR_UNTOKENIZABLE;
    case ErrorCode::DimMismatch: return TF_ERR_DIM_MISMATCH;
    case ErrorCode::NotALeaf: return TF_ERR_NOT_A_LEAF;
  }
  return TF_ERR_INTERNAL;
}

template <class F>
tf_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return TF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TF_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

char* dump(const json& j) { return dup_string(j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"); }

tf_tokenizer* wrap(TokenizerModel model) { return new tf_tokenizer{std::move(model)}; }

CorpusSource to_source(const tf_corpus_options* c) {
  require(c && c->path, "corpus path is required");
  CorpusSource src;
  src.path = c->path;
  src.format = c->format == TF_CORPUS_JSONL ? CorpusFormat::JsonLines : CorpusFormat::PlainLines;
  if (c->has_budget) src.budget_chars = c->budget_chars;
  src.seed = c->seed;
  return src;
}

Mode to_mode(tf_mode m) { return m == TF_MODE_SENTENCEPIECE ? Mode::SentencePiece : Mode::ByteLevel; }

void apply_options(TrainerConfig& cfg, const tf_trainer_options* o) {
  if (!o) return;
  cfg.min_pair_frequency = o->min_pair_frequency;
  cfg.character_coverage = o->character_coverage != 0;
  if (o->max_token_length == 0) {
    cfg.max_token_length = std::nullopt;
  } else if (o->max_token_length > 0) {
    cfg.max_token_length = static_cast<std::size_t>(o->max_token_length);
  }
}

json token_entry(const TokenizerModel& m, TokenId id) { return {{"id", id}, {"token", display_token(m, id)}}; }

json extension_json(const TokenizerModel& m, const ExtensionReport& r, std::size_t requested, std::uint64_t seed) {
  json added = json::array();
  for (TokenId id : r.added_tokens) added.push_back(token_entry(m, id));
  return {{"requested", requested},
          {"added_tokens", added},
          {"added_count", r.added_tokens.size()},
          {"added_merges", r.added_merges},
          {"skipped_invalid", r.skipped_invalid},
          {"chars_added_for_coverage", r.chars_added_for_coverage},
          {"exhausted", r.exhausted},
          {"seed", seed},
          {"vocab_size", m.vocab_size()}};
}

json stt_json(const TokenizerModel& m, const SttReport& r) {
  json unreachable = json::array();
  for (TokenId id : r.unreachable) unreachable.push_back(token_entry(m, id));
  return {{"count", r.count}, {"skipped_special", r.skipped_special}, {"unreachable", unreachable}};
}

json compression_json(const CompressionResult& c) {
  return {{"bytes", c.byte_count}, {"tokens", c.token_count}, {"bytes_per_token", c.bytes_per_token}};
}

}  // namespace

extern "C" {

const char* tf_last_error(void) { return g_last_error.c_str(); }

const char* tf_status_name(tf_status status) {
  switch (status) {
    case TF_OK: return "ok";
    case TF_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case TF_ERR_IO: return "Io";
    case TF_ERR_FORMAT: return "FormatError";
    case TF_ERR_UNSUPPORTED_MODEL: return "UnsupportedModel";
    case TF_ERR_INCONSISTENT_MODEL: return "InconsistentModel";
    case TF_ERR_UNKNOWN_ATOM: return "UnknownAtom";
    case TF_ERR_UNKNOWN_ID: return "UnknownId";
    case TF_ERR_TARGET_TOO_SMALL: return "TargetTooSmall";
    case TF_ERR_EXHAUSTED: return "Exhausted";
    case TF_ERR_EMPTY_CORPUS: return "EmptyCorpus";
    case TF_ERR_DEGENERATE_DISTRIBUTION: return "DegenerateDistribution";
    case TF_ERR_EMPTY_SET: return "EmptySet";
    case TF_ERR_UNTOKENIZABLE: return "UntokenizableNewToken";
    case TF_ERR_DIM_MISMATCH: return "DimMismatch";
    case TF_ERR_NOT_A_LEAF: return "NotALeaf";
    case TF_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* tf_version(void) { return "0.1.0"; }

void tf_string_free(char* s) { std::free(s); }
void tf_ids_free(uint32_t* ids) { std::free(ids); }
void tf_floats_free(float* values) { std::free(values); }

void tf_corpus_options_init(tf_corpus_options* options) {
  if (!options) return;
  options->path = nullptr;
  options->format = TF_CORPUS_LINES;
  options->has_budget = 0;
  options->budget_chars = 0;
  options->seed = 0;
}

void tf_trainer_options_init(tf_trainer_options* options, tf_mode mode) {
  if (!options) return;
  options->mode = mode;
  options->min_pair_frequency = 2;
  options->max_token_length = -1;
  options->character_coverage = 1;
}

void tf_eval_options_init(tf_eval_options* options) {
  if (!options) return;
  options->metrics = TF_METRIC_COMPRESSION | TF_METRIC_RENYI | TF_METRIC_STT;
  options->alpha = 2.5;
  options->observed_denominator = 0;
  options->added = nullptr;
  options->added_count = 0;
  options->unused_merge_skipping = -1;
}

tf_status tf_load(const char* path, tf_tokenizer** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    *out = wrap(load_tokenizer(path));
  });
}

tf_status tf_load_json(const char* text, size_t length, tf_tokenizer** out) {
  return guarded([&] {
    require(text && out, "json and out are required");
    *out = wrap(parse_tokenizer_json(std::string_view(text, length)));
  });
}

tf_status tf_save(const tf_tokenizer* tok, const char* path) {
  return guarded([&] {
    require(tok && path, "tokenizer and path are required");
    save_tokenizer(tok->model, path);
  });
}

tf_status tf_to_json(const tf_tokenizer* tok, char** out) {
  return guarded([&] {
    require(tok && out, "tokenizer and out are required");
    *out = dup_string(to_canonical_json(tok->model));
  });
}

void tf_free(tf_tokenizer* tok) { delete tok; }

size_t tf_vocab_size(const tf_tokenizer* tok) { return tok ? tok->model.vocab_size() : 0; }

tf_status tf_encode(const tf_tokenizer* tok, const char* text, size_t length, int merge_skipping, uint32_t** ids,
                    size_t* count) {
  return guarded([&] {
    require(tok && (text || length == 0) && ids && count, "tokenizer, text, ids and count are required");
    const auto tokens = tok->model.tokenize(std::string_view(text ? text : "", length), merge_skipping != 0);
    auto* buf = static_cast<uint32_t*>(std::malloc(std::max<std::size_t>(1, tokens.size()) * sizeof(uint32_t)));
    if (!buf) throw std::bad_alloc();
    std::copy(tokens.begin(), tokens.end(), buf);
    *ids = buf;
    *count = tokens.size();
  });
}

tf_status tf_decode(const tf_tokenizer* tok, const uint32_t* ids, size_t count, char** text) {
  return guarded([&] {
    require(tok && (ids || count == 0) && text, "tokenizer, ids and text are required");
    *text = dup_string(tok->model.decode(std::span<const TokenId>(ids, count)));
  });
}

tf_status tf_train(const tf_corpus_options* corpus, const tf_trainer_options* options, size_t target_vocab_size,
                   tf_tokenizer** out, char** report) {
  return guarded([&] {
    require(options && out, "options and out are required");
    const CorpusSource src = to_source(corpus);
    TrainerConfig cfg = TrainerConfig::defaults(to_mode(options->mode));
    apply_options(cfg, options);
    cfg.target_vocab_size = target_vocab_size;
    const TextPipeline pipeline(cfg.mode, default_normalizer(cfg.mode), default_pre_tokenizer(cfg.mode));
    const auto docs = read_documents(src);
    TrainResult result = train_bpe(count_segments(pipeline, docs), cfg);
    if (report) {
      *report = dump({{"merges_added", result.merges_added},
                      {"skipped_invalid", result.skipped_invalid},
                      {"stopped_early", result.stopped_early},
                      {"documents", docs.size()},
                      {"seed", src.seed},
                      {"vocab_size", result.model.vocab_size()}});
    }
    *out = wrap(std::move(result.model));
  });
}

tf_status tf_extend_continued(const tf_tokenizer* base, const tf_corpus_options* corpus, size_t n_new,
                              const tf_trainer_options* options, tf_tokenizer** out, char** report) {
  return guarded([&] {
    require(base && out, "base and out are required");
    const CorpusSource src = to_source(corpus);
    TrainerConfig cfg = TrainerConfig::for_model(base->model);
    apply_options(cfg, options);
    const auto docs = read_documents(src);
    ExtensionResult result = continued_extend(base->model, count_segments(base->model.pipeline(), docs), n_new, cfg);
    if (report) {
      json j = extension_json(result.model, result.report, n_new, src.seed);
      j["method"] = "continued";
      *report = dump(j);
    }
    *out = wrap(std::move(result.model));
  });
}

tf_status tf_extend_naive(const tf_tokenizer* base, const tf_tokenizer* aux, const tf_corpus_options* corpus,
                          size_t n_new, tf_naive_strategy strategy, const tf_trainer_options* options,
                          tf_tokenizer** out, char** report) {
  return guarded([&] {
    require(base && out, "base and out are required");
    const CorpusSource src = to_source(corpus);
    TrainerConfig cfg = TrainerConfig::for_model(base->model);
    apply_options(cfg, options);
    const auto docs = read_documents(src);
    const NaiveStrategy s = strategy == TF_NAIVE_APPEND ? NaiveStrategy::Append : NaiveStrategy::Regen;
    ExtensionResult result = naive_extend(base->model, count_segments(base->model.pipeline(), docs), n_new, s, cfg,
                                          aux ? &aux->model : nullptr);
    if (report) {
      json j = extension_json(result.model, result.report, n_new, src.seed);
      j["method"] = "naive";
      j["strategy"] = s == NaiveStrategy::Regen ? "regen" : "append";
      *report = dump(j);
    }
    *out = wrap(std::move(result.model));
  });
}

tf_status tf_prune(const tf_tokenizer* tok, tf_prune_method method, const tf_corpus_options* corpus, size_t k,
                   tf_tokenizer** out, char** order_report) {
  return guarded([&] {
    require(tok && out, "tokenizer and out are required");
    const TokenizerModel& model = tok->model;
    std::optional<CorpusSource> src;
    CorpusStats stats;
    if (method != TF_PRUNE_LAST_ID) {
      src = to_source(corpus);
      stats = collect_stats(model, count_segments(model.pipeline(), read_documents(*src)));
    }
    PruneOrder order;
    switch (method) {
      case TF_PRUNE_LEAF_FREQ: order = leaf_frequency_prune_order(model, stats, stt(model).unreachable); break;
      case TF_PRUNE_MERGE_BASED: order = merge_based_prune_order(model, stats); break;
      case TF_PRUNE_NAIVE_FREQ: order = naive_frequency_prune_order(model, stats); break;
      case TF_PRUNE_LAST_ID: order = id_prune_order(model); break;
      default: require(false, "unknown prune method");
    }
    TokenizerModel pruned = apply_prune(model, order, k);
    if (order_report) {
      json tokens = json::array();
      for (TokenId id : order.tokens) tokens.push_back(token_entry(model, id));
      json newly = json::array();
      for (const auto& content : stt_delta(model, pruned)) {
        newly.push_back(display_token(pruned, *pruned.find(content)));
      }
      *order_report = dump({{"method", std::string(prune_strategy_name(order.strategy))},
                            {"k", k},
                            {"order", tokens},
                            {"protected", order.protected_tokens.size()},
                            {"newly_unreachable", newly},
                            {"seed", src ? src->seed : 0},
                            {"vocab_size", pruned.vocab_size()}});
    }
    *out = wrap(std::move(pruned));
  });
}

tf_status tf_stt(const tf_tokenizer* tok, char** report) {
  return guarded([&] {
    require(tok && report, "tokenizer and report are required");
    *report = dump(stt_json(tok->model, stt(tok->model)));
  });
}

tf_status tf_evaluate(const tf_tokenizer* tok, const tf_corpus_options* corpus, const tf_eval_options* options,
                      char** report) {
  return guarded([&] {
    require(tok && options && report, "tokenizer, options and report are required");
    const TokenizerModel& model = tok->model;
    json j = json::object();
    const unsigned needs_corpus = TF_METRIC_COMPRESSION | TF_METRIC_RENYI | TF_METRIC_UNUSED;
    std::vector<std::string> docs;
    if (options->metrics & needs_corpus) {
      const CorpusSource src = to_source(corpus);
      docs = read_documents(src);
      j["documents"] = docs.size();
      j["seed"] = src.seed;
    }
    if (options->metrics & TF_METRIC_COMPRESSION) {
      j["compression"] = {{"merge_skipping_on", compression_json(compression(model, docs, true))},
                          {"merge_skipping_off", compression_json(compression(model, docs, false))}};
    }
    if (options->metrics & TF_METRIC_RENYI) {
      RenyiOptions ro;
      ro.alpha = options->alpha;
      ro.observed_denominator = options->observed_denominator != 0;
      j["renyi"] = {{"alpha", ro.alpha},
                    {"denominator", ro.observed_denominator ? "observed" : "vocab"},
                    {"efficiency", renyi_efficiency(model, docs, ro)}};
    }
    if (options->metrics & TF_METRIC_UNUSED) {
      require(options->added || options->added_count == 0, "added ids missing");
      const std::set<TokenId> added(options->added, options->added + options->added_count);
      std::optional<bool> skipping;
      if (options->unused_merge_skipping >= 0) skipping = options->unused_merge_skipping != 0;
      const UnusedReport u = unused_added(model, added, docs, skipping);
      json unused = json::array();
      for (TokenId id : u.unused_tokens) unused.push_back(token_entry(model, id));
      j["unused"] = {{"added", u.added},
                     {"unused", u.unused},
                     {"fraction", u.fraction},
                     {"merge_skipping", skipping.value_or(model.ignore_merges())},
                     {"unused_tokens", unused}};
    }
    if (options->metrics & TF_METRIC_STT) j["stt"] = stt_json(model, stt(model));
    *report = dump(j);
  });
}

tf_status tf_histogram(const tf_tokenizer* tok, const tf_corpus_options* corpus, const uint32_t* subset,
                       size_t subset_count, char** csv) {
  return guarded([&] {
    require(tok && csv, "tokenizer and csv are required");
    const auto docs = read_documents(to_source(corpus));
    std::optional<std::set<TokenId>> filter;
    if (subset) filter = std::set<TokenId>(subset, subset + subset_count);
    std::string out = "id,token,count\r\n";
    for (const auto& [id, n] : frequency_histogram(tok->model, docs, filter)) {
      out += std::to_string(id) + "," + csv_field(display_token(tok->model, id)) + "," + std::to_string(n) + "\r\n";
    }
    *csv = dup_string(out);
  });
}

tf_status tf_fvt_transfer(const tf_tokenizer* old_tok, const tf_tokenizer* new_tok, const float* old_data,
                          size_t rows, size_t cols, float** new_data, size_t* new_rows) {
  return guarded([&] {
    require(old_tok && new_tok && (old_data || rows * cols == 0) && new_data && new_rows,
            "tokenizers, data and outputs are required");
    EmbeddingMatrix old(rows, cols);
    std::copy(old_data, old_data + rows * cols, old.data.begin());
    const EmbeddingMatrix out = fvt_transfer(old_tok->model, new_tok->model, old);
    auto* buf = static_cast<float*>(std::malloc(std::max<std::size_t>(1, out.data.size()) * sizeof(float)));
    if (!buf) throw std::bad_alloc();
    std::copy(out.data.begin(), out.data.end(), buf);
    *new_data = buf;
    *new_rows = out.rows;
  });
}

tf_status tf_fvt_transfer_files(const tf_tokenizer* old_tok, const tf_tokenizer* new_tok,
                                const char* old_embeddings_path, const char* out_path) {
  return guarded([&] {
    require(old_tok && new_tok && old_embeddings_path && out_path, "tokenizers and paths are required");
    const EmbeddingMatrix old = read_embeddings(old_embeddings_path);
    write_embeddings(fvt_transfer(old_tok->model, new_tok->model, old), out_path);
  });
}

tf_status tf_inspect(const tf_tokenizer* tok, int include_graph, char** report) {
  return guarded([&] {
    require(tok && report, "tokenizer and report are required");
    const TokenizerModel& model = tok->model;
    const MergeGraph graph(model, {});
    json j = {{"mode", std::string(mode_name(model.mode()))},
              {"vocab_size", model.vocab_size()},
              {"merges", model.merges().size()},
              {"special_tokens", model.parts().special_tokens.size()},
              {"ignore_merges", model.ignore_merges()},
              {"atomics", graph.atomics().size()},
              {"leaves", graph.leaves().size()}};
    if (include_graph) {
      json nodes = json::array();
      for (TokenId id = 0; id < model.vocab_size(); ++id) {
        json node = {{"id", id}, {"token", display_token(model, id)}, {"downstream_count", graph.downstream_merges(id)}};
        if (const auto& s = graph.split(id)) {
          node["split"] = {s->left, s->right};
        } else {
          node["split"] = nullptr;
        }
        nodes.push_back(std::move(node));
      }
      j["graph"] = std::move(nodes);
    }
    *report = dump(j);
  });
}

}  // extern "C"
