#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <pottsfit/alignment.hpp>
#include <pottsfit/rng.hpp>

#include "test_util.hpp"

using namespace pottsfit;

TEST_CASE("fasta parsing") {
  testutil::TempDir tmp("fasta");
  SUBCASE("two records") {
    testutil::write_file(tmp.path("a.fasta"), ">s1\nACD-\n>s2\nACDE\n");
    Alignment a = parse_alignment(tmp.path("a.fasta"), AlignmentFormat::Fasta);
    CHECK(a.count() == 2);
    CHECK(a.length() == 4);
    CHECK(a.sequence_string(0) == "ACD-");
    CHECK(a.sequence_string(1) == "ACDE");
    CHECK(a.ids[0] == "s1");
  }
  SUBCASE("multi-line sequences and lowercase") {
    testutil::write_file(tmp.path("b.fasta"), ">s1\nAC\nde\n>s2\nACDE\n");
    Alignment a = parse_alignment(tmp.path("b.fasta"), AlignmentFormat::Fasta);
    CHECK(a.sequence_string(0) == "ACDE");
  }
  SUBCASE("empty file") {
    testutil::write_file(tmp.path("empty.fasta"), "");
    CHECK_THROWS_WITH_AS(parse_alignment(tmp.path("empty.fasta"), AlignmentFormat::Fasta),
                         doctest::Contains("no sequences"), std::runtime_error);
  }
  SUBCASE("ragged lengths name the record") {
    testutil::write_file(tmp.path("r.fasta"), ">ok\nACDE\n>bad\nACDEF\n");
    CHECK_THROWS_WITH_AS(parse_alignment(tmp.path("r.fasta"), AlignmentFormat::Fasta),
                         doctest::Contains("bad"), std::runtime_error);
  }
  SUBCASE("unknown symbol names symbol, record, column") {
    testutil::write_file(tmp.path("u.fasta"), ">s1\nACDE\n>s2\nAC?E\n");
    try {
      parse_alignment(tmp.path("u.fasta"), AlignmentFormat::Fasta);
      FAIL("expected throw");
    } catch (const std::runtime_error& e) {
      std::string msg = e.what();
      CHECK(msg.find('?') != std::string::npos);
      CHECK(msg.find("s2") != std::string::npos);
      CHECK(msg.find('3') != std::string::npos);
    }
  }
}

TEST_CASE("a2m insert columns are dropped") {
  testutil::TempDir tmp("a2m");
  testutil::write_file(tmp.path("a.a2m"), ">s1\nAC.d-E\n>s2\nACx-E\n");
  Alignment a = parse_alignment(tmp.path("a.a2m"), AlignmentFormat::A2m);
  CHECK(a.length() == 4);
  CHECK(a.sequence_string(0) == "AC-E");
  CHECK(a.sequence_string(1) == "AC-E");
}

TEST_CASE("plain rows and state csv") {
  testutil::TempDir tmp("rows");
  testutil::write_file(tmp.path("p.txt"), "ACDE\nacde\n");
  Alignment a = parse_alignment(tmp.path("p.txt"), AlignmentFormat::PlainRows);
  CHECK(a.count() == 2);
  CHECK(a.sequence_string(1) == "ACDE");

  testutil::write_file(tmp.path("s.csv"), "0,1,2\n2,0,0\n");
  Alignment b = parse_alignment(tmp.path("s.csv"), AlignmentFormat::StateCsv);
  CHECK(b.alphabet.size() == 3);
  CHECK(b.states(0, 2) == 2);
  Alignment c = parse_alignment(tmp.path("s.csv"), AlignmentFormat::StateCsv,
                                Alphabet::protein(), 6);
  CHECK(c.alphabet.size() == 6);
  testutil::write_file(tmp.path("bad.csv"), "0,1\n5,0\n");
  CHECK_THROWS(parse_alignment(tmp.path("bad.csv"), AlignmentFormat::StateCsv,
                               Alphabet::protein(), 3));
}

namespace {
Alignment make_alignment(const std::vector<std::string>& rows) {
  Alphabet ab = Alphabet::protein();
  Eigen::MatrixXi st(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) st(i, j) = *ab.index_of(rows[i][j]);
  return Alignment{ab, st, {}};
}

Alignment random_alignment(int n, int d, int n_states, uint64_t seed) {
  Alphabet ab = Alphabet::numeric(n_states);
  Rng rng(seed);
  Eigen::MatrixXi st(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      st(i, j) = static_cast<int>(rng() % static_cast<uint64_t>(n_states));
  return Alignment{ab, st, {}};
}
}  // namespace

TEST_CASE("sequence weights") {
  SUBCASE("five identical sequences") {
    Alignment a = make_alignment({"ACDE", "ACDE", "ACDE", "ACDE", "ACDE"});
    Eigen::VectorXd w = sequence_weights(a);
    for (int i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("two sequences differing everywhere") {
    Alignment a = make_alignment({"ACDE", "GHIK"});
    Eigen::VectorXd w = sequence_weights(a);
    CHECK(w(0) == 1.0);
    CHECK(w(1) == 1.0);
  }
  SUBCASE("one duplicate pair plus a distant sequence") {
    Alignment a = make_alignment({"ACDE", "ACDE", "GHIK"});
    Eigen::VectorXd w = sequence_weights(a);
    CHECK(w(0) == 0.5);
    CHECK(w(1) == 0.5);
    CHECK(w(2) == 1.0);
  }
  SUBCASE("bounds and permutation equivariance") {
    Alignment a = random_alignment(40, 8, 3, 7);
    Eigen::VectorXd w = sequence_weights(a);
    for (int i = 0; i < a.count(); ++i) {
      CHECK(w(i) >= 1.0 / a.count());
      CHECK(w(i) <= 1.0);
    }
    // reverse the sequence order
    Alignment b = a;
    for (int i = 0; i < a.count(); ++i)
      b.states.row(i) = a.states.row(a.count() - 1 - i);
    Eigen::VectorXd wb = sequence_weights(b);
    for (int i = 0; i < a.count(); ++i) CHECK(wb(i) == w(a.count() - 1 - i));
  }
  SUBCASE("raising the threshold never increases a weight") {
    Alignment a = random_alignment(30, 10, 2, 11);
    SequenceWeightConfig lo{0.2, true}, hi{0.6, true};
    Eigen::VectorXd wl = sequence_weights(a, lo);
    Eigen::VectorXd wh = sequence_weights(a, hi);
    for (int i = 0; i < a.count(); ++i) CHECK(wh(i) <= wl(i) + 1e-15);
  }
  SUBCASE("threshold must be a strict fraction") {
    Alignment a = make_alignment({"ACDE", "ACDE"});
    CHECK_THROWS(sequence_weights(a, SequenceWeightConfig{0.0, true}));
    CHECK_THROWS(sequence_weights(a, SequenceWeightConfig{1.0, true}));
  }
}

TEST_CASE("rare state mask") {
  // site 0: 'A' x9 + 'C' x1; site 1: 'A' x10
  std::vector<std::string> rows(10, "AA");
  rows[9] = "CA";
  Alignment a = make_alignment(rows);
  Alphabet ab = a.alphabet;
  MaskMatrix m10 = rare_state_mask(a, 10);
  CHECK(m10(0, *ab.index_of('A')) == 1);  // 9 < 10 -> flagged
  CHECK(m10(1, *ab.index_of('A')) == 0);  // exactly 10 -> not flagged
  CHECK(m10(0, *ab.index_of('C')) == 1);
  MaskMatrix m1 = rare_state_mask(a, 1);
  CHECK(m1(0, *ab.index_of('A')) == 0);
  CHECK(m1(0, *ab.index_of('C')) == 0);
  CHECK(m1(0, *ab.index_of('D')) == 1);  // count 0 stays flagged
  CHECK_THROWS(rare_state_mask(a, 0));
}

TEST_CASE("encoding") {
  std::vector<std::string> syms = {"A", "C", "-"};
  Alphabet ab{syms};
  // two sites, wildtype "AA"; K = 2 with columns (C, -) at both sites
  Eigen::MatrixXi st(3, 2);
  st << 0, 0,  // "AA"
      1, 0,    // "CA"
      2, 1;    // "-C"
  Alignment a{ab, st, {}};
  EncodedAlignment enc = encode(a, "AA", 1);
  CHECK(enc.K == 2);
  CHECK(enc.codes(0, 0) == 0);
  CHECK(enc.codes(0, 1) == 0);
  CHECK(enc.codes(1, 0) == 1);  // 'C' -> first non-reference column
  CHECK(enc.codes(2, 0) == 2);  // '-' -> second column
  CHECK(enc.codes(2, 1) == 1);
  CHECK(enc.column_symbol(0, 0) == 1);  // 'C'
  CHECK(enc.column_symbol(0, 1) == 2);  // '-'

  SUBCASE("gap as wild-type symbol is a valid reference") {
    EncodedAlignment e2 = encode(a, "-A", 1);
    CHECK(e2.codes(2, 0) == 0);           // '-' is the reference at site 0
    CHECK(e2.column_symbol(0, 0) == 0);   // 'A' takes the first column
    CHECK(e2.codes(0, 0) == 1);
  }
  SUBCASE("wildtype symbol must be in the alphabet") {
    CHECK_THROWS(encode(a, "AZ", 1));
  }
  SUBCASE("all-wildtype rows encode to all-zero") {
    Eigen::MatrixXi wt_rows = Eigen::MatrixXi::Zero(3, 2);
    Alignment awt{ab, wt_rows, {}};
    EncodedAlignment e = encode(awt, "AA", 1);
    CHECK(e.codes.cwiseAbs().maxCoeff() == 0);
  }
  SUBCASE("unobserved symbol still gets a column and is flagged rare") {
    CHECK(enc.rare(0, 1) == 0);                  // 'C' observed at site 0
    MaskMatrix m = rare_state_mask(a, 1);
    CHECK(m(1, 2) == 1);                         // '-' never at site 1
    CHECK(enc.code_of_state(1, 2) == 2);         // still has a column
  }
}

TEST_CASE("encode/decode round trip") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    Alignment a = random_alignment(25, 6, 4, seed);
    Rng rng(seed ^ 0xabcd);
    std::vector<int> wt(a.length());
    for (int j = 0; j < a.length(); ++j) wt[j] = static_cast<int>(rng() % 4);
    EncodedAlignment enc = encode(a, wt, 1);
    Alignment back = decode(enc);
    CHECK(back.states == a.states);
  }
}

TEST_CASE("encoded TSV dump and weights csv") {
  testutil::TempDir tmp("dump");
  std::vector<std::string> syms = {"A", "C", "-"};
  Alphabet ab{syms};
  Eigen::MatrixXi st(2, 2);
  st << 1, 0, 0, 2;
  Alignment a{ab, st, {}};
  EncodedAlignment enc = encode(a, "AA", 1);
  write_encoded_tsv(enc, tmp.path("enc.tsv"));
  std::string text = testutil::read_file(tmp.path("enc.tsv"));
  CHECK(text.find("site0:C") != std::string::npos);
  CHECK(text.find("site1:-") != std::string::npos);
  CHECK(text.find("1\t0\t0\t0") != std::string::npos);
  CHECK(text.find("0\t0\t0\t1") != std::string::npos);
}

TEST_CASE("subset keeps weights and mask") {
  Alignment a = random_alignment(10, 4, 3, 5);
  EncodedAlignment enc = encode(a, std::vector<int>(4, 0), 2);
  enc.weights = Eigen::VectorXd::LinSpaced(10, 0.1, 1.0);
  EncodedAlignment sub = enc.subset({1, 3, 5});
  CHECK(sub.count() == 3);
  CHECK(sub.codes.row(0) == enc.codes.row(1));
  CHECK(sub.weights(1) == enc.weights(3));
  CHECK(sub.rare == enc.rare);
}
