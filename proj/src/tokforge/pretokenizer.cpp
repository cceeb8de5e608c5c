#include "tokforge/pretokenizer.hpp"

#include <unicode/regex.h>
#include <unicode/utext.h>

#include "tokforge/error.hpp"
#include "tokforge/unicode.hpp"

namespace tokforge {

namespace {

enum class CharClass { Letter, Number, Space, Other };

CharClass classify(char32_t cp) {
  if (unicode::is_letter(cp)) return CharClass::Letter;
  if (unicode::is_number(cp)) return CharClass::Number;
  if (unicode::is_whitespace(cp)) return CharClass::Space;
  return CharClass::Other;
}

// Length of the contraction suffix ('s, 't, 're, 've, 'm, 'll, 'd) at pos.
std::size_t contraction_length(std::string_view text, std::size_t pos) {
  if (text[pos] != '\'' || pos + 1 >= text.size()) return 0;
  const char a = text[pos + 1];
  if (a == 's' || a == 't' || a == 'm' || a == 'd') return 2;
  if (pos + 2 < text.size()) {
    const char b = text[pos + 2];
    if ((a == 'r' && b == 'e') || (a == 'v' && b == 'e') || (a == 'l' && b == 'l')) return 3;
  }
  return 0;
}

}  // namespace

void Gpt2Splitter::split(std::string_view text, const std::function<void(std::string_view)>& emit) const {
  const std::size_t n = text.size();
  std::size_t pos = 0;
  while (pos < n) {
    if (const std::size_t len = contraction_length(text, pos)) {
      emit(text.substr(pos, len));
      pos += len;
      continue;
    }

    char32_t cp;
    const std::size_t cp_len = unicode::decode(text, pos, cp);
    std::size_t body = pos;
    char32_t body_cp = cp;
    std::size_t body_len = cp_len;
    if (cp == ' ' && pos + 1 < n) {
      body = pos + 1;
      body_len = unicode::decode(text, body, body_cp);
    }
    const CharClass cls = classify(body_cp);
    if (cls != CharClass::Space) {
      std::size_t end = body + body_len;
      while (end < n) {
        char32_t next;
        const std::size_t next_len = unicode::decode(text, end, next);
        if (classify(next) != cls) break;
        end += next_len;
      }
      emit(text.substr(pos, end - pos));
      pos = end;
      continue;
    }

    // Whitespace run: \s+(?!\S) gives back its last character when a
    // non-space follows; a single space before a non-space falls to \s+.
    std::size_t end = pos;
    std::size_t last_start = pos;
    std::size_t run = 0;
    while (end < n) {
      char32_t next;
      const std::size_t next_len = unicode::decode(text, end, next);
      if (!unicode::is_whitespace(next)) break;
      last_start = end;
      end += next_len;
      ++run;
    }
    if (end < n && run >= 2) end = last_start;
    emit(text.substr(pos, end - pos));
    pos = end;
  }
}

struct RegexSplitter::Impl {
  std::unique_ptr<icu::RegexPattern> pattern;
};

RegexSplitter::RegexSplitter(std::string_view pattern) : impl_(std::make_unique<Impl>()) {
  UErrorCode status = U_ZERO_ERROR;
  UParseError parse_error;
  const auto source =
      icu::UnicodeString::fromUTF8(icu::StringPiece(pattern.data(), static_cast<int32_t>(pattern.size())));
  impl_->pattern.reset(icu::RegexPattern::compile(source, 0, parse_error, status));
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::Format, "pre-tokenizer pattern does not compile: " + std::string(pattern));
  }
}

RegexSplitter::~RegexSplitter() = default;

void RegexSplitter::split(std::string_view text, const std::function<void(std::string_view)>& emit) const {
  if (text.empty()) return;
  UErrorCode status = U_ZERO_ERROR;
  UText* utext = utext_openUTF8(nullptr, text.data(), static_cast<int64_t>(text.size()), &status);
  std::unique_ptr<icu::RegexMatcher> matcher(impl_->pattern->matcher(status));
  if (U_FAILURE(status)) {
    utext_close(utext);
    throw Error(ErrorCode::Format, "regex matcher creation failed");
  }
  matcher->reset(utext);
  std::size_t last = 0;
  while (matcher->find(status) && U_SUCCESS(status)) {
    const auto start = static_cast<std::size_t>(matcher->start64(status));
    const auto end = static_cast<std::size_t>(matcher->end64(status));
    if (start > last) emit(text.substr(last, start - last));
    if (end > start) emit(text.substr(start, end - start));
    last = end;
  }
  if (last < text.size()) emit(text.substr(last));
  matcher.reset();
  utext_close(utext);
}

void WhitespaceSplitter::split(std::string_view text, const std::function<void(std::string_view)>& emit) const {
  std::size_t start = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp;
    const std::size_t len = unicode::decode(text, pos, cp);
    if (unicode::is_whitespace(cp)) {
      if (pos > start) emit(text.substr(start, pos - start));
      start = pos + len;
    }
    pos += len;
  }
  if (start < text.size()) emit(text.substr(start));
}

void MetaspaceSplitter::split(std::string_view text, const std::function<void(std::string_view)>& emit) const {
  std::size_t start = 0;
  std::size_t pos = text.find(kWordBoundary);
  while (pos != std::string_view::npos) {
    if (pos > start) {
      emit(text.substr(start, pos - start));
      start = pos;
    }
    pos = text.find(kWordBoundary, pos + kWordBoundary.size());
  }
  if (start < text.size()) emit(text.substr(start));
}

std::shared_ptr<const SegmentSplitter> make_splitter(Mode /*mode*/, const PreTokenizerConfig& config) {
  switch (config.kind) {
    case PreTokenizerKind::Regex:
      if (config.pattern == kGpt2Pattern) return std::make_shared<Gpt2Splitter>();
      return std::make_shared<RegexSplitter>(config.pattern);
    case PreTokenizerKind::Whitespace:
      return std::make_shared<WhitespaceSplitter>();
    case PreTokenizerKind::Metaspace:
      return std::make_shared<MetaspaceSplitter>();
    case PreTokenizerKind::None:
      break;
  }
  return std::make_shared<WholeTextSplitter>();
}

}  // namespace tokforge
