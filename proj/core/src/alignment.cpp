#include "pottsfit/alignment.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "pottsfit/io_util.hpp"

namespace pottsfit {

namespace {

const char* kProteinSymbols = "ACDEFGHIKLMNPQRSTVWY-";

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

Alphabet Alphabet::protein() {
  std::vector<std::string> syms;
  for (const char* p = kProteinSymbols; *p; ++p) syms.emplace_back(1, *p);
  return Alphabet(std::move(syms));
}

Alphabet Alphabet::numeric(int n_states) {
  if (n_states < 2) fail("alphabet needs at least 2 states");
  std::vector<std::string> syms;
  syms.reserve(n_states);
  for (int s = 0; s < n_states; ++s) syms.push_back(std::to_string(s));
  return Alphabet(std::move(syms));
}

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) fail("alphabet needs at least 2 symbols");
  for (size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) fail("empty alphabet symbol");
    if (!index_.emplace(symbols_[i], static_cast<int>(i)).second)
      fail("duplicate alphabet symbol: " + symbols_[i]);
    if (symbols_[i].size() != 1) single_char_ = false;
  }
}

std::optional<int> Alphabet::index_of(const std::string& sym) const {
  auto it = index_.find(sym);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Alphabet::index_of(char c) const {
  return index_of(std::string(1, c));
}

std::string Alignment::sequence_string(int i) const {
  if (!alphabet.single_char()) fail("alignment alphabet is not single-character");
  std::string s;
  s.reserve(length());
  for (int j = 0; j < length(); ++j) s += alphabet.symbol(states(i, j));
  return s;
}

namespace {

Alignment from_letter_rows(const std::vector<std::pair<std::string, std::string>>& recs,
                           const Alphabet& alphabet, const std::string& path) {
  if (recs.empty()) fail(path + ": no sequences");
  const size_t d = recs.front().second.size();
  if (d < 2) fail(path + ": sequences must have at least 2 sites");
  Eigen::MatrixXi states(recs.size(), d);
  std::vector<std::string> ids;
  ids.reserve(recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    const auto& [id, seq] = recs[i];
    if (seq.size() != d)
      fail(path + ": record '" + (id.empty() ? std::to_string(i + 1) : id) +
           "' has length " + std::to_string(seq.size()) + ", expected " +
           std::to_string(d));
    for (size_t j = 0; j < d; ++j) {
      auto idx = alphabet.index_of(seq[j]);
      if (!idx)
        fail(path + ": unknown symbol '" + std::string(1, seq[j]) + "' in record '" +
             (id.empty() ? std::to_string(i + 1) : id) + "' column " +
             std::to_string(j + 1));
      states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *idx;
    }
    ids.push_back(id);
  }
  return Alignment{alphabet, std::move(states), std::move(ids)};
}

// a2m: lowercase letters and '.' are insert columns and are dropped;
// everything else is uppercased. Plain fasta/rows: uppercase only.
std::string normalize_sequence(const std::string& raw, bool a2m) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (a2m && (c == '.' || std::islower(static_cast<unsigned char>(c)))) continue;
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

Alignment parse_fasta_like(const std::string& path, bool a2m, const Alphabet& alphabet) {
  std::ifstream in(path);
  if (!in) fail("cannot open: " + path);
  std::vector<std::pair<std::string, std::string>> recs;
  std::string line, id, seq;
  bool have_record = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '>') {
      if (have_record) recs.emplace_back(id, normalize_sequence(seq, a2m));
      id = trim(line.substr(1));
      seq.clear();
      have_record = true;
    } else {
      if (!have_record) fail(path + ": sequence data before first '>' header");
      seq += line;
    }
  }
  if (have_record) recs.emplace_back(id, normalize_sequence(seq, a2m));
  return from_letter_rows(recs, alphabet, path);
}

Alignment parse_plain_rows(const std::string& path, const Alphabet& alphabet) {
  std::ifstream in(path);
  if (!in) fail("cannot open: " + path);
  std::vector<std::pair<std::string, std::string>> recs;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    recs.emplace_back(std::string(), normalize_sequence(line, false));
  }
  return from_letter_rows(recs, alphabet, path);
}

Alignment parse_state_csv(const std::string& path, int num_states) {
  std::ifstream in(path);
  if (!in) fail("cannot open: " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  size_t lineno = 0;
  int max_state = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<int> row;
    for (const auto& tok : split(line, ',')) {
      long v = parse_long(trim(tok), path + ":" + std::to_string(lineno));
      if (v < 0) fail(path + ": negative state at line " + std::to_string(lineno));
      max_state = std::max(max_state, static_cast<int>(v));
      row.push_back(static_cast<int>(v));
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail(path + ": record " + std::to_string(lineno) + " has length " +
           std::to_string(row.size()) + ", expected " +
           std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(path + ": no sequences");
  if (rows.front().size() < 2) fail(path + ": sequences must have at least 2 sites");
  int n_states = num_states > 0 ? num_states : max_state + 1;
  if (max_state >= n_states)
    fail(path + ": state " + std::to_string(max_state) + " exceeds declared count " +
         std::to_string(n_states));
  Alignment a{Alphabet::numeric(n_states),
              Eigen::MatrixXi(rows.size(), rows.front().size()),
              {}};
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      a.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return a;
}

}  // namespace

Alignment parse_alignment(const std::string& path, AlignmentFormat fmt,
                          const Alphabet& alphabet, int num_states) {
  switch (fmt) {
    case AlignmentFormat::Fasta:
      return parse_fasta_like(path, /*a2m=*/false, alphabet);
    case AlignmentFormat::A2m:
      return parse_fasta_like(path, /*a2m=*/true, alphabet);
    case AlignmentFormat::PlainRows:
      return parse_plain_rows(path, alphabet);
    case AlignmentFormat::StateCsv:
      return parse_state_csv(path, num_states);
  }
  fail("unreachable");
}

Eigen::VectorXd sequence_weights(const Alignment& a, const SequenceWeightConfig& cfg) {
  if (cfg.hamming_threshold <= 0.0 || cfg.hamming_threshold >= 1.0)
    fail("hamming_threshold must lie strictly between 0 and 1");
  const int n = a.count();
  const int d = a.length();
  if (n < 1) fail("empty alignment");
  // cutoff on raw mismatch count: D_HM < t  <=>  mismatches < t*d
  const double cutoff = cfg.hamming_threshold * d;
  std::vector<int> neighbor_count(n, cfg.include_self ? 1 : 0);
  for (int i = 0; i < n; ++i) {
    for (int i2 = i + 1; i2 < n; ++i2) {
      int mism = 0;
      for (int j = 0; j < d; ++j) mism += (a.states(i, j) != a.states(i2, j));
      if (mism < cutoff) {
        ++neighbor_count[i];
        ++neighbor_count[i2];
      }
    }
  }
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    if (neighbor_count[i] == 0)
      fail("sequence " + std::to_string(i) +
           " has no neighbors; enable include_self for well-defined weights");
    w(i) = 1.0 / neighbor_count[i];
  }
  return w;
}

MaskMatrix rare_state_mask(const Alignment& a, int min_count) {
  if (min_count < 1) fail("min_count must be >= 1");
  const int d = a.length();
  const int A = a.alphabet.size();
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(d, A);
  for (int i = 0; i < a.count(); ++i)
    for (int j = 0; j < d; ++j) counts(j, a.states(i, j))++;
  MaskMatrix mask(d, A);
  for (int j = 0; j < d; ++j)
    for (int s = 0; s < A; ++s) mask(j, s) = counts(j, s) < min_count ? 1 : 0;
  return mask;
}

int EncodedAlignment::column_symbol(int site, int c) const {
  // canonical order with the reference removed
  return c < reference[site] ? c : c + 1;
}

int EncodedAlignment::code_of_state(int site, int alphabet_idx) const {
  if (alphabet_idx == reference[site]) return 0;
  return (alphabet_idx < reference[site] ? alphabet_idx : alphabet_idx - 1) + 1;
}

bool EncodedAlignment::rare_code(int site, int code) const {
  return rare(site, code == 0 ? reference[site] : column_symbol(site, code - 1)) != 0;
}

EncodedAlignment EncodedAlignment::subset(const std::vector<int>& rows) const {
  EncodedAlignment out = *this;
  out.codes.resize(rows.size(), codes.cols());
  out.weights.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.codes.row(static_cast<Eigen::Index>(i)) = codes.row(rows[i]);
    out.weights(static_cast<Eigen::Index>(i)) = weights(rows[i]);
  }
  return out;
}

EncodedAlignment encode(const Alignment& a, const std::vector<int>& wildtype,
                        int rare_min_count) {
  const int d = a.length();
  const int A = a.alphabet.size();
  if (static_cast<int>(wildtype.size()) != d)
    fail("wildtype length " + std::to_string(wildtype.size()) + " != alignment length " +
         std::to_string(d));
  for (int j = 0; j < d; ++j)
    if (wildtype[j] < 0 || wildtype[j] >= A)
      fail("wildtype state at site " + std::to_string(j) + " outside alphabet");

  EncodedAlignment enc{a.alphabet, wildtype, Eigen::MatrixXi(a.count(), d),
                       Eigen::VectorXd::Ones(a.count()),
                       rare_state_mask(a, rare_min_count), A - 1};
  for (int i = 0; i < a.count(); ++i)
    for (int j = 0; j < d; ++j)
      enc.codes(i, j) = enc.code_of_state(j, a.states(i, j));
  return enc;
}

EncodedAlignment encode(const Alignment& a, const std::string& wildtype,
                        int rare_min_count) {
  if (!a.alphabet.single_char()) fail("string wild-type needs a single-character alphabet");
  std::vector<int> wt;
  wt.reserve(wildtype.size());
  for (char c : wildtype) {
    auto idx = a.alphabet.index_of(c);
    if (!idx) fail(std::string("wildtype symbol '") + c + "' not in alphabet");
    wt.push_back(*idx);
  }
  return encode(a, wt, rare_min_count);
}

Alignment decode(const EncodedAlignment& enc) {
  Alignment a{enc.alphabet, Eigen::MatrixXi(enc.count(), enc.length()), {}};
  for (int i = 0; i < enc.count(); ++i)
    for (int j = 0; j < enc.length(); ++j) {
      int c = enc.codes(i, j);
      a.states(i, j) = c == 0 ? enc.reference[j] : enc.column_symbol(j, c - 1);
    }
  return a;
}

void write_encoded_tsv(const EncodedAlignment& enc, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  for (int j = 0; j < enc.length(); ++j)
    for (int c = 0; c < enc.K; ++c)
      out << (j || c ? "\t" : "") << "site" << j << ':'
          << enc.alphabet.symbol(enc.column_symbol(j, c));
  out << '\n';
  for (int i = 0; i < enc.count(); ++i) {
    for (int j = 0; j < enc.length(); ++j)
      for (int c = 0; c < enc.K; ++c)
        out << (j || c ? "\t" : "") << (enc.codes(i, j) == c + 1 ? 1 : 0);
    out << '\n';
  }
}

}  // namespace pottsfit
