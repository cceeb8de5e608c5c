#include <gtest/gtest.h>
#include <zlib.h>

#include <algorithm>

#include "tempdir.hpp"
#include "toy.hpp"
#include "tokforge/corpus.hpp"

using namespace tokforge;

TEST(Corpus, PlainLinesOneDocumentEach) {
  TempDir dir;
  CorpusSource src{dir.write("c.txt", "first line\nsecond\r\nthird"), CorpusFormat::PlainLines, {}, 0};
  EXPECT_EQ(read_documents(src), (std::vector<std::string>{"first line", "second", "third"}));
}

TEST(Corpus, BudgetStopsAfterCrossingDocument) {
  TempDir dir;
  const auto path = dir.write("c.txt", "abc\nde\nf\n");
  CorpusSource src{path, CorpusFormat::PlainLines, 0, 0};
  EXPECT_TRUE(read_documents(src).empty());
  src.budget_chars = 4;
  EXPECT_EQ(read_documents(src), (std::vector<std::string>{"abc", "de"}));
  src.budget_chars = 3;
  EXPECT_EQ(read_documents(src), (std::vector<std::string>{"abc"}));
  // Code points, not bytes.
  CorpusSource wide{dir.write("w.txt", "\xC3\xA9\xC3\xA9\nx\n"), CorpusFormat::PlainLines, 3, 0};
  EXPECT_EQ(read_documents(wide).size(), 2u);
}

TEST(Corpus, JsonLines) {
  TempDir dir;
  CorpusSource src{dir.write("c.jsonl", "{\"text\": \"a b\"}\n\n{\"text\": \"\\u00e9\", \"id\": 3}\n"),
                   CorpusFormat::JsonLines, {}, 0};
  EXPECT_EQ(read_documents(src), (std::vector<std::string>{"a b", "\xC3\xA9"}));

  CorpusSource bad{dir.write("bad.jsonl", "{\"text\": \"ok\"}\n{\"body\": \"x\"}\n"), CorpusFormat::JsonLines, {}, 0};
  EXPECT_EQ(toy::error_of([&] { read_documents(bad); }), ErrorCode::Format);
  CorpusSource broken{dir.write("broken.jsonl", "{not json\n"), CorpusFormat::JsonLines, {}, 0};
  EXPECT_EQ(toy::error_of([&] { read_documents(broken); }), ErrorCode::Format);
}

TEST(Corpus, MissingFileIsIoError) {
  CorpusSource src{"/nonexistent/corpus.txt", CorpusFormat::PlainLines, {}, 0};
  EXPECT_EQ(toy::error_of([&] { read_documents(src); }), ErrorCode::Io);
}

TEST(Corpus, ReadsGzip) {
  TempDir dir;
  const auto path = dir.file("c.txt.gz");
  gzFile f = gzopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  gzputs(f, "alpha\nbeta\n");
  gzclose(f);
  EXPECT_EQ(read_documents({path, CorpusFormat::PlainLines, {}, 0}), (std::vector<std::string>{"alpha", "beta"}));
}

TEST(Corpus, SeedShufflesDeterministically) {
  TempDir dir;
  std::string body;
  std::vector<std::string> lines;
  for (int i = 0; i < 50; ++i) {
    lines.push_back("doc" + std::to_string(i));
    body += lines.back() + "\n";
  }
  const auto path = dir.write("c.txt", body);
  const auto a = read_documents({path, CorpusFormat::PlainLines, {}, 17});
  const auto b = read_documents({path, CorpusFormat::PlainLines, {}, 17});
  const auto c = read_documents({path, CorpusFormat::PlainLines, {}, 18});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, lines);
  EXPECT_NE(a, c);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  auto expected = lines;
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(sorted, expected);
  // The budget applies after shuffling.
  const auto limited = read_documents({path, CorpusFormat::PlainLines, 8, 17});
  EXPECT_EQ(limited, (std::vector<std::string>{a[0], a[1]}));
}

TEST(Corpus, CountSegmentsSortedWithFrequencies) {
  const auto m = toy::toy1();
  const std::vector<std::string> docs = {"ab c ab", "c d"};
  const auto counts = count_segments(m.pipeline(), docs);
  EXPECT_EQ(counts, (SegmentCounts{{"ab", 2}, {"c", 2}, {"d", 1}}));
  const std::vector<std::string> segs = {"x", "y", "x"};
  EXPECT_EQ(count_segments(segs), (SegmentCounts{{"x", 2}, {"y", 1}}));
}

TEST(Corpus, AtomicWriteReplaces) {
  TempDir dir;
  const auto path = dir.write("out.txt", "old");
  write_file_atomic(path, "new contents");
  EXPECT_EQ(read_file(path), "new contents");
}
