#pragma once

#include <functional>
#include <memory>
#include <string_view>

#include "tokforge/model.hpp"

namespace tokforge {

// Splits normalized text into segments. Segments are views into the input.
class SegmentSplitter {
 public:
  virtual ~SegmentSplitter() = default;
  virtual void split(std::string_view text, const std::function<void(std::string_view)>& emit) const = 0;
};

// Hand-written matcher for the GPT-2 pattern (kGpt2Pattern).
class Gpt2Splitter final : public SegmentSplitter {
 public:
  void split(std::string_view text, const std::function<void(std::string_view)>& emit) const override;
};

// Arbitrary regex via ICU. Matches and the gaps between them both become
// segments ("isolated" split behaviour).
class RegexSplitter final : public SegmentSplitter {
 public:
  explicit RegexSplitter(std::string_view pattern);
  ~RegexSplitter() override;
  void split(std::string_view text, const std::function<void(std::string_view)>& emit) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Splits on whitespace; the whitespace itself is dropped.
class WhitespaceSplitter final : public SegmentSplitter {
 public:
  void split(std::string_view text, const std::function<void(std::string_view)>& emit) const override;
};

// Splits before every word-boundary marker, which stays as the prefix of
// its segment. Lossless.
class MetaspaceSplitter final : public SegmentSplitter {
 public:
  void split(std::string_view text, const std::function<void(std::string_view)>& emit) const override;
};

class WholeTextSplitter final : public SegmentSplitter {
 public:
  void split(std::string_view text, const std::function<void(std::string_view)>& emit) const override {
    if (!text.empty()) emit(text);
  }
};

std::shared_ptr<const SegmentSplitter> make_splitter(Mode mode, const PreTokenizerConfig& config);

}  // namespace tokforge
