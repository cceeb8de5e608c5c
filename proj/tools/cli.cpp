#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tokforge.h"

namespace tokforge::cli {

namespace {

using json = nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  DataError(tf_status s, const std::string& message) : std::runtime_error(message), status(s) {}
  tf_status status;
};

void check(tf_status s) {
  if (s != TF_OK) throw DataError(s, tf_last_error());
}

struct TokenizerFree {
  void operator()(tf_tokenizer* t) const { tf_free(t); }
};
struct StringFree {
  void operator()(char* s) const { tf_string_free(s); }
};
using Tokenizer = std::unique_ptr<tf_tokenizer, TokenizerFree>;
using CString = std::unique_ptr<char, StringFree>;

Tokenizer load(const std::string& path) {
  tf_tokenizer* t = nullptr;
  check(tf_load(path.c_str(), &t));
  return Tokenizer(t);
}

void write_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path tmp = fs::path(path);
  tmp += ".partial";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError(TF_ERR_IO, "cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f.flush()) throw DataError(TF_ERR_IO, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError(TF_ERR_IO, "cannot rename onto " + path);
}

std::string read_all(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(TF_ERR_IO, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct CorpusArgs {
  std::string path;
  std::string format = "lines";
  std::optional<std::uint64_t> budget;
  std::uint64_t seed = 0;

  tf_corpus_options options(const std::string& p) const {
    tf_corpus_options o;
    tf_corpus_options_init(&o);
    o.path = p.c_str();
    o.format = format == "jsonl" ? TF_CORPUS_JSONL : TF_CORPUS_LINES;
    o.has_budget = budget.has_value();
    o.budget_chars = budget.value_or(0);
    o.seed = seed;
    return o;
  }
  tf_corpus_options options() const { return options(path); }
};

void add_corpus_flags(CLI::App* cmd, CorpusArgs& c, bool path_required) {
  auto* opt = cmd->add_option("--corpus", c.path, "Corpus file (plain lines or JSON lines; .gz accepted; - for stdin)");
  if (path_required) opt->required();
  cmd->add_option("--format", c.format, "Corpus format")->check(CLI::IsMember({"lines", "jsonl"}));
  cmd->add_option("--budget-chars", c.budget, "Stop reading after this many characters");
  cmd->add_option("--seed", c.seed, "Document shuffle seed (0 keeps file order)");
}

struct TrainerArgs {
  std::uint64_t min_pair_frequency = 2;
  std::int64_t max_token_length = -1;
  bool no_char_coverage = false;

  tf_trainer_options options(tf_mode mode) const {
    tf_trainer_options o;
    tf_trainer_options_init(&o, mode);
    o.min_pair_frequency = min_pair_frequency;
    o.max_token_length = max_token_length;
    o.character_coverage = no_char_coverage ? 0 : 1;
    return o;
  }
};

void add_trainer_flags(CLI::App* cmd, TrainerArgs& t) {
  cmd->add_option("--min-pair-frequency", t.min_pair_frequency, "Smallest pair count that may become a merge");
  cmd->add_option("--max-token-length", t.max_token_length,
                  "Longest token in atomic units (0 unbounded, -1 default)");
  cmd->add_flag("--no-char-coverage", t.no_char_coverage, "Do not add missing corpus characters first");
}

json parse_report(const CString& s) { return json::parse(s.get()); }

std::string pretty(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

void maybe_write(const std::string& path, const std::string& bytes) {
  if (!path.empty()) write_atomic(path, bytes);
}

// Token ids from a JSON list of ids or an extension report.
std::vector<std::uint32_t> read_id_list(const std::string& path) {
  json j;
  try {
    j = json::parse(read_all(path));
  } catch (const json::exception& e) {
    throw DataError(TF_ERR_FORMAT, path + ": " + e.what());
  }
  const json* list = &j;
  if (j.is_object()) {
    if (!j.contains("added_tokens")) throw DataError(TF_ERR_FORMAT, path + ": no added_tokens field");
    list = &j["added_tokens"];
  }
  if (!list->is_array()) throw DataError(TF_ERR_FORMAT, path + ": expected a list of token ids");
  std::vector<std::uint32_t> ids;
  for (const auto& e : *list) {
    if (e.is_number_unsigned()) {
      ids.push_back(e.get<std::uint32_t>());
    } else if (e.is_object() && e.contains("id") && e["id"].is_number_unsigned()) {
      ids.push_back(e["id"].get<std::uint32_t>());
    } else {
      throw DataError(TF_ERR_FORMAT, path + ": entries must be ids or {\"id\": ...} objects");
    }
  }
  return ids;
}

tf_prune_method prune_method(const std::string& name) {
  if (name == "leaf-freq") return TF_PRUNE_LEAF_FREQ;
  if (name == "merge-based") return TF_PRUNE_MERGE_BASED;
  if (name == "naive-freq") return TF_PRUNE_NAIVE_FREQ;
  return TF_PRUNE_LAST_ID;
}

const std::vector<std::string> kPruneMethods = {"leaf-freq", "merge-based", "naive-freq", "last-id"};

struct ExtendArgs {
  std::string method = "continued";
  std::string strategy = "regen";
  std::size_t n_new = 0;
  std::string aux;
};

// Runs one extension on `base`; returns the new tokenizer and its report.
std::pair<Tokenizer, json> extend(const tf_tokenizer* base, const ExtendArgs& e, const tf_corpus_options& corpus,
                                  const TrainerArgs& t) {
  const tf_trainer_options topts = t.options(TF_MODE_BYTE_LEVEL);
  tf_tokenizer* out = nullptr;
  char* report = nullptr;
  if (e.method == "continued") {
    if (!e.aux.empty()) throw UsageError("--aux applies to --method naive only");
    check(tf_extend_continued(base, &corpus, e.n_new, &topts, &out, &report));
  } else {
    Tokenizer aux;
    if (!e.aux.empty()) aux = load(e.aux);
    const tf_naive_strategy s = e.strategy == "append" ? TF_NAIVE_APPEND : TF_NAIVE_REGEN;
    check(tf_extend_naive(base, aux.get(), &corpus, e.n_new, s, &topts, &out, &report));
  }
  Tokenizer tok(out);
  const CString r(report);
  return {std::move(tok), parse_report(r)};
}

std::pair<Tokenizer, json> prune(const tf_tokenizer* tok, const std::string& method, std::size_t k,
                                 const CorpusArgs& c, const std::string& corpus_path) {
  const tf_prune_method m = prune_method(method);
  if (m != TF_PRUNE_LAST_ID && corpus_path.empty()) throw UsageError("--corpus is required for " + method);
  const tf_corpus_options corpus = c.options(corpus_path);
  tf_tokenizer* out = nullptr;
  char* report = nullptr;
  check(tf_prune(tok, m, m == TF_PRUNE_LAST_ID ? nullptr : &corpus, k, &out, &report));
  Tokenizer pruned(out);
  const CString r(report);
  return {std::move(pruned), parse_report(r)};
}

void warn_if_exhausted(const json& report, std::ostream& err) {
  if (report.value("exhausted", false)) {
    err << "warning: only " << report["added_count"].get<std::size_t>() << " of "
        << report["requested"].get<std::size_t>() << " tokens could be added\n";
  }
}

void print_extension(const json& r, std::ostream& out) {
  out << "added tokens       " << r["added_count"].get<std::size_t>() << "\n"
      << "added merges       " << r["added_merges"].get<std::size_t>() << "\n"
      << "skipped invalid    " << r["skipped_invalid"].get<std::uint64_t>() << "\n"
      << "coverage chars     " << r["chars_added_for_coverage"].get<std::size_t>() << "\n"
      << "vocab size         " << r["vocab_size"].get<std::size_t>() << "\n";
}

void print_prune(const json& r, std::ostream& out) {
  out << "method             " << r["method"].get<std::string>() << "\n"
      << "pruned             " << r["k"].get<std::size_t>() << "\n"
      << "order length       " << r["order"].size() << "\n"
      << "newly unreachable  " << r["newly_unreachable"].size() << "\n"
      << "vocab size         " << r["vocab_size"].get<std::size_t>() << "\n";
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Modify, prune and audit BPE tokenizers", "tokforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tf_version()));
  bool as_json = false;
  app.add_flag("--json", as_json, "Print machine-readable reports");

  std::function<void()> action;

  // train
  auto* train = app.add_subcommand("train", "Train a BPE tokenizer from scratch");
  CorpusArgs train_corpus;
  TrainerArgs train_args;
  std::string train_mode = "byte_level", train_out, train_report;
  std::size_t vocab_size = 0;
  add_corpus_flags(train, train_corpus, true);
  add_trainer_flags(train, train_args);
  train->add_option("--mode", train_mode, "Tokenizer mode")->check(CLI::IsMember({"byte_level", "sentencepiece"}));
  train->add_option("--vocab-size", vocab_size, "Target vocabulary size")->required();
  train->add_option("--out", train_out, "Output tokenizer file")->required();
  train->add_option("--report", train_report, "Report file");
  train->callback([&] {
    action = [&] {
      const tf_mode mode = train_mode == "sentencepiece" ? TF_MODE_SENTENCEPIECE : TF_MODE_BYTE_LEVEL;
      const tf_trainer_options topts = train_args.options(mode);
      const tf_corpus_options corpus = train_corpus.options();
      tf_tokenizer* t = nullptr;
      char* report = nullptr;
      check(tf_train(&corpus, &topts, vocab_size, &t, &report));
      const Tokenizer tok(t);
      const CString r(report);
      const json j = parse_report(r);
      check(tf_save(tok.get(), train_out.c_str()));
      maybe_write(train_report, pretty(j));
      if (j["stopped_early"].get<bool>()) {
        err << "warning: no pair reached the minimum frequency; stopped at vocab size "
            << j["vocab_size"].get<std::size_t>() << "\n";
      }
      if (as_json) {
        out << pretty(j);
      } else {
        out << "merges added       " << j["merges_added"].get<std::size_t>() << "\n"
            << "vocab size         " << j["vocab_size"].get<std::size_t>() << "\n";
      }
    };
  });

  // extend
  auto* ext = app.add_subcommand("extend", "Add tokens to a tokenizer");
  CorpusArgs ext_corpus;
  TrainerArgs ext_trainer;
  ExtendArgs ext_args;
  std::string ext_in, ext_out, ext_report;
  add_corpus_flags(ext, ext_corpus, true);
  add_trainer_flags(ext, ext_trainer);
  ext->add_option("--method", ext_args.method, "Extension method")->check(CLI::IsMember({"continued", "naive"}));
  ext->add_option("--strategy", ext_args.strategy, "Merge handling for naive extension")
      ->check(CLI::IsMember({"regen", "append"}));
  ext->add_option("--n-new", ext_args.n_new, "Number of tokens to add")->required();
  ext->add_option("--aux", ext_args.aux, "Auxiliary tokenizer for naive extension (trained on the corpus if absent)");
  ext->add_option("--in", ext_in, "Input tokenizer file")->required();
  ext->add_option("--out", ext_out, "Output tokenizer file")->required();
  ext->add_option("--report", ext_report, "Report file");
  ext->callback([&] {
    action = [&] {
      const Tokenizer base = load(ext_in);
      auto [tok, report] = extend(base.get(), ext_args, ext_corpus.options(), ext_trainer);
      check(tf_save(tok.get(), ext_out.c_str()));
      maybe_write(ext_report, pretty(report));
      warn_if_exhausted(report, err);
      if (as_json) {
        out << pretty(report);
      } else {
        print_extension(report, out);
      }
    };
  });

  // prune
  auto* pr = app.add_subcommand("prune", "Remove tokens from a tokenizer");
  CorpusArgs pr_corpus;
  std::string pr_method = "leaf-freq", pr_in, pr_out, pr_order;
  std::size_t pr_k = 0;
  add_corpus_flags(pr, pr_corpus, false);
  pr->add_option("--method", pr_method, "Prune order")->check(CLI::IsMember(kPruneMethods));
  pr->add_option("--k", pr_k, "Number of tokens to remove")->required();
  pr->add_option("--in", pr_in, "Input tokenizer file")->required();
  pr->add_option("--out", pr_out, "Output tokenizer file")->required();
  pr->add_option("--order-out", pr_order, "Prune order report file");
  pr->callback([&] {
    action = [&] {
      const Tokenizer tok = load(pr_in);
      auto [pruned, report] = prune(tok.get(), pr_method, pr_k, pr_corpus, pr_corpus.path);
      check(tf_save(pruned.get(), pr_out.c_str()));
      maybe_write(pr_order, pretty(report));
      if (as_json) {
        out << pretty(report);
      } else {
        print_prune(report, out);
      }
    };
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Prune, then extend back with new tokens");
  CorpusArgs pipe_corpus;
  TrainerArgs pipe_trainer;
  ExtendArgs pipe_ext;
  std::string pipe_prune_method = "leaf-freq", pipe_prune_corpus, pipe_extend_corpus, pipe_in, pipe_out,
              pipe_order, pipe_report;
  std::size_t pipe_k = 0;
  add_corpus_flags(pipe, pipe_corpus, false);
  add_trainer_flags(pipe, pipe_trainer);
  pipe->add_option("--prune-method", pipe_prune_method, "Prune order")->check(CLI::IsMember(kPruneMethods));
  pipe->add_option("--prune-k", pipe_k, "Number of tokens to remove")->required();
  pipe->add_option("--prune-corpus", pipe_prune_corpus, "Corpus for pruning statistics (default --corpus)");
  pipe->add_option("--extend-method", pipe_ext.method, "Extension method")
      ->check(CLI::IsMember({"continued", "naive"}));
  pipe->add_option("--strategy", pipe_ext.strategy, "Merge handling for naive extension")
      ->check(CLI::IsMember({"regen", "append"}));
  pipe->add_option("--extend-n", pipe_ext.n_new, "Number of tokens to add")->required();
  pipe->add_option("--extend-corpus", pipe_extend_corpus, "Corpus for extension (default --corpus)");
  pipe->add_option("--aux", pipe_ext.aux, "Auxiliary tokenizer for naive extension");
  pipe->add_option("--in", pipe_in, "Input tokenizer file")->required();
  pipe->add_option("--out", pipe_out, "Output tokenizer file")->required();
  pipe->add_option("--order-out", pipe_order, "Prune order report file");
  pipe->add_option("--report", pipe_report, "Extension report file");
  pipe->callback([&] {
    action = [&] {
      const std::string prune_path = pipe_prune_corpus.empty() ? pipe_corpus.path : pipe_prune_corpus;
      const std::string extend_path = pipe_extend_corpus.empty() ? pipe_corpus.path : pipe_extend_corpus;
      if (extend_path.empty()) throw UsageError("--corpus or --extend-corpus is required");
      const Tokenizer tok = load(pipe_in);
      auto [pruned, prune_report] = prune(tok.get(), pipe_prune_method, pipe_k, pipe_corpus, prune_path);
      auto [extended, ext_report] = extend(pruned.get(), pipe_ext, pipe_corpus.options(extend_path), pipe_trainer);
      check(tf_save(extended.get(), pipe_out.c_str()));
      maybe_write(pipe_order, pretty(prune_report));
      maybe_write(pipe_report, pretty(ext_report));
      warn_if_exhausted(ext_report, err);
      if (as_json) {
        out << pretty(json{{"prune", prune_report}, {"extend", ext_report}});
      } else {
        print_prune(prune_report, out);
        print_extension(ext_report, out);
      }
    };
  });

  // stt
  auto* stt = app.add_subcommand("stt", "Count tokens unreachable through merges");
  std::string stt_in, stt_report;
  stt->add_option("--in", stt_in, "Tokenizer file")->required();
  stt->add_option("--report", stt_report, "Report file");
  stt->callback([&] {
    action = [&] {
      const Tokenizer tok = load(stt_in);
      char* report = nullptr;
      check(tf_stt(tok.get(), &report));
      const CString r(report);
      const json j = parse_report(r);
      maybe_write(stt_report, pretty(j));
      if (as_json) {
        out << pretty(j);
        return;
      }
      out << "unreachable        " << j["count"].get<std::size_t>() << "\n"
          << "skipped special    " << j["skipped_special"].get<std::size_t>() << "\n";
      for (const auto& e : j["unreachable"]) {
        out << "  " << e["id"].get<std::uint32_t>() << "\t" << e["token"].get<std::string>() << "\n";
      }
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Intrinsic metrics");
  CorpusArgs ev_corpus;
  std::string ev_in, ev_metrics = "compression,renyi,stt", ev_added, ev_csv, ev_report, ev_denominator = "vocab",
              ev_unused_skipping = "model";
  double ev_alpha = 2.5;
  add_corpus_flags(ev, ev_corpus, false);
  ev->add_option("--in", ev_in, "Tokenizer file")->required();
  ev->add_option("--metrics", ev_metrics, "Comma-separated subset of compression,renyi,unused,stt");
  ev->add_option("--added", ev_added, "Added token ids (JSON list or extension report) for the unused metric");
  ev->add_option("--alpha", ev_alpha, "Renyi order");
  ev->add_option("--denominator", ev_denominator, "Renyi normalization")
      ->check(CLI::IsMember({"vocab", "observed"}));
  ev->add_option("--unused-skipping", ev_unused_skipping, "Merge skipping while counting unused tokens")
      ->check(CLI::IsMember({"model", "on", "off"}));
  ev->add_option("--csv", ev_csv, "CSV output file");
  ev->add_option("--report", ev_report, "Report file");
  ev->callback([&] {
    action = [&] {
      tf_eval_options o;
      tf_eval_options_init(&o);
      o.metrics = 0;
      std::stringstream ss(ev_metrics);
      for (std::string m; std::getline(ss, m, ',');) {
        if (m == "compression") {
          o.metrics |= TF_METRIC_COMPRESSION;
        } else if (m == "renyi") {
          o.metrics |= TF_METRIC_RENYI;
        } else if (m == "unused") {
          o.metrics |= TF_METRIC_UNUSED;
        } else if (m == "stt") {
          o.metrics |= TF_METRIC_STT;
        } else {
          throw UsageError("unknown metric " + m);
        }
      }
      if ((o.metrics & ~static_cast<unsigned>(TF_METRIC_STT)) && ev_corpus.path.empty()) {
        throw UsageError("--corpus is required for corpus metrics");
      }
      std::vector<std::uint32_t> added;
      if (o.metrics & TF_METRIC_UNUSED) {
        if (ev_added.empty()) throw UsageError("--added is required for the unused metric");
        added = read_id_list(ev_added);
        o.added = added.data();
        o.added_count = added.size();
      }
      o.alpha = ev_alpha;
      o.observed_denominator = ev_denominator == "observed";
      o.unused_merge_skipping = ev_unused_skipping == "model" ? -1 : ev_unused_skipping == "on" ? 1 : 0;

      const Tokenizer tok = load(ev_in);
      const tf_corpus_options corpus = ev_corpus.options();
      char* report = nullptr;
      check(tf_evaluate(tok.get(), ev_corpus.path.empty() ? nullptr : &corpus, &o, &report));
      const CString r(report);
      const json j = parse_report(r);
      maybe_write(ev_report, pretty(j));

      std::ostringstream row;
      row << std::setprecision(17);
      const auto cell = [&](const json* v) {
        if (v) row << *v;
      };
      const json* comp = j.contains("compression") ? &j["compression"] : nullptr;
      cell(comp ? &(*comp)["merge_skipping_on"]["bytes"] : nullptr);
      row << ',';
      cell(comp ? &(*comp)["merge_skipping_on"]["tokens"] : nullptr);
      row << ',';
      cell(comp ? &(*comp)["merge_skipping_on"]["bytes_per_token"] : nullptr);
      row << ',';
      cell(comp ? &(*comp)["merge_skipping_off"]["bytes_per_token"] : nullptr);
      row << ',';
      cell(j.contains("renyi") ? &j["renyi"]["efficiency"] : nullptr);
      row << ',';
      cell(j.contains("unused") ? &j["unused"]["fraction"] : nullptr);
      row << ',';
      cell(j.contains("stt") ? &j["stt"]["count"] : nullptr);
      const std::string csv =
          "byte_count,token_count,bytes_per_token,bytes_per_token_no_skipping,renyi_efficiency,"
          "unused_added_fraction,stt_unreachable\r\n" +
          row.str() + "\r\n";
      maybe_write(ev_csv, csv);

      if (as_json) {
        out << pretty(j);
        return;
      }
      out << std::setprecision(6) << std::fixed;
      if (comp) {
        out << "bytes per token    " << (*comp)["merge_skipping_on"]["bytes_per_token"].get<double>() << "\n"
            << "  skipping off     " << (*comp)["merge_skipping_off"]["bytes_per_token"].get<double>() << "\n";
      }
      if (j.contains("renyi")) out << "renyi efficiency   " << j["renyi"]["efficiency"].get<double>() << "\n";
      if (j.contains("unused")) out << "unused added       " << j["unused"]["fraction"].get<double>() << "\n";
      if (j.contains("stt")) out << "unreachable        " << j["stt"]["count"].get<std::size_t>() << "\n";
    };
  });

  // histogram
  auto* hist = app.add_subcommand("histogram", "Token frequencies as CSV");
  CorpusArgs hist_corpus;
  std::string hist_in, hist_subset, hist_out;
  add_corpus_flags(hist, hist_corpus, true);
  hist->add_option("--in", hist_in, "Tokenizer file")->required();
  hist->add_option("--subset", hist_subset, "Restrict to these ids (JSON list or extension report)");
  hist->add_option("--out", hist_out, "CSV output file (stdout if absent)");
  hist->callback([&] {
    action = [&] {
      const Tokenizer tok = load(hist_in);
      std::vector<std::uint32_t> subset;
      if (!hist_subset.empty()) subset = read_id_list(hist_subset);
      const tf_corpus_options corpus = hist_corpus.options();
      char* csv = nullptr;
      check(tf_histogram(tok.get(), &corpus, hist_subset.empty() ? nullptr : subset.data(), subset.size(), &csv));
      const CString c(csv);
      if (hist_out.empty()) {
        out << c.get();
      } else {
        write_atomic(hist_out, c.get());
      }
    };
  });

  // fvt
  auto* fvt = app.add_subcommand("fvt", "Transfer an embedding matrix to a modified tokenizer");
  std::string fvt_old, fvt_new, fvt_emb, fvt_out;
  fvt->add_option("--old-tok", fvt_old, "Original tokenizer")->required();
  fvt->add_option("--new-tok", fvt_new, "Modified tokenizer")->required();
  fvt->add_option("--old-emb", fvt_emb, "Original embeddings (TOKEMB01)")->required();
  fvt->add_option("--out", fvt_out, "Output embeddings")->required();
  fvt->callback([&] {
    action = [&] {
      const Tokenizer a = load(fvt_old);
      const Tokenizer b = load(fvt_new);
      check(tf_fvt_transfer_files(a.get(), b.get(), fvt_emb.c_str(), fvt_out.c_str()));
      if (as_json) {
        out << pretty(json{{"rows", tf_vocab_size(b.get())}, {"out", fvt_out}});
      } else {
        out << "rows               " << tf_vocab_size(b.get()) << "\n";
      }
    };
  });

  // inspect
  auto* insp = app.add_subcommand("inspect", "Summarize a tokenizer as JSON");
  std::string insp_in, insp_out;
  bool insp_graph = false;
  insp->add_option("--in", insp_in, "Tokenizer file")->required();
  insp->add_flag("--graph", insp_graph, "Include the merge graph");
  insp->add_option("--out", insp_out, "Output file (stdout if absent)");
  insp->callback([&] {
    action = [&] {
      const Tokenizer tok = load(insp_in);
      char* report = nullptr;
      check(tf_inspect(tok.get(), insp_graph ? 1 : 0, &report));
      const CString r(report);
      if (insp_out.empty()) {
        out << r.get();
      } else {
        write_atomic(insp_out, r.get());
      }
    };
  });

  // encode / decode
  auto* enc = app.add_subcommand("encode", "Tokenize text");
  std::string enc_in, enc_text;
  bool enc_no_skip = false;
  enc->add_option("--in", enc_in, "Tokenizer file")->required();
  enc->add_option("--text", enc_text, "Text to tokenize")->required();
  enc->add_flag("--no-skipping", enc_no_skip, "Disable merge skipping");
  enc->callback([&] {
    action = [&] {
      const Tokenizer tok = load(enc_in);
      std::uint32_t* ids = nullptr;
      std::size_t n = 0;
      check(tf_encode(tok.get(), enc_text.data(), enc_text.size(), enc_no_skip ? 0 : 1, &ids, &n));
      const std::vector<std::uint32_t> v(ids, ids + n);
      tf_ids_free(ids);
      if (as_json) {
        out << json(v).dump() << "\n";
      } else {
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
        out << "\n";
      }
    };
  });

  auto* dec = app.add_subcommand("decode", "Turn token ids back into text");
  std::string dec_in;
  std::vector<std::uint32_t> dec_ids;
  dec->add_option("--in", dec_in, "Tokenizer file")->required();
  dec->add_option("--ids", dec_ids, "Token ids")->required();
  dec->callback([&] {
    action = [&] {
      const Tokenizer tok = load(dec_in);
      char* text = nullptr;
      check(tf_decode(tok.get(), dec_ids.data(), dec_ids.size(), &text));
      const CString t(text);
      out << t.get() << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: " << tf_status_name(e.status) << ": " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    err << "error: malformed report: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace tokforge::cli
