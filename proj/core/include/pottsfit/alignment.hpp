#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pottsfit {

using MaskMatrix = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Symbol table for an alignment. The order of the symbol list is the
// canonical state order; the encoder derives indicator-column order from it.
class Alphabet {
 public:
  // 20 amino-acid letters plus the gap '-'.
  static Alphabet protein();
  // Tokens "0".."n-1" for synthetic integer-state data.
  static Alphabet numeric(int n_states);
  explicit Alphabet(std::vector<std::string> symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbol(int idx) const { return symbols_[idx]; }
  std::optional<int> index_of(const std::string& sym) const;
  std::optional<int> index_of(char c) const;
  // True when every symbol is a single character (sequences render as strings).
  bool single_char() const { return single_char_; }

  bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
  bool single_char_ = true;
};

// Aligned categorical sequences: states(i, j) is the alphabet index of
// sequence i at site j. Invariant: n >= 1, d >= 2, all entries valid indices.
struct Alignment {
  Alphabet alphabet;
  Eigen::MatrixXi states;        // n x d
  std::vector<std::string> ids;  // may be empty

  int count() const { return static_cast<int>(states.rows()); }
  int length() const { return static_cast<int>(states.cols()); }
  std::string sequence_string(int i) const;  // single-char alphabets only
};

enum class AlignmentFormat { Fasta, A2m, PlainRows, StateCsv };

// Reads an alignment. Letters are uppercased; a2m insert columns
// (lowercase and '.') are dropped before length checks. StateCsv reads
// comma-separated integer states; its alphabet is numeric with
// max(state)+1 symbols unless num_states > 0 pins the count.
Alignment parse_alignment(const std::string& path, AlignmentFormat fmt,
                          const Alphabet& alphabet = Alphabet::protein(),
                          int num_states = 0);

struct SequenceWeightConfig {
  double hamming_threshold = 0.2;  // strict fraction in (0,1)
  bool include_self = true;
};

// omega_i = 1 / #{i' : normalized Hamming distance(i,i') < threshold};
// the sequence itself is counted when include_self is set, so omega_i <= 1.
Eigen::VectorXd sequence_weights(const Alignment& a,
                                 const SequenceWeightConfig& cfg = {});

// flags(j, s) set iff state s occurs fewer than min_count times at site j.
MaskMatrix rare_state_mask(const Alignment& a, int min_count = 10);

// Reference-coded alignment. Per site j the wild-type symbol is state 0 and
// carries no indicator column; the remaining K = |alphabet|-1 states map to
// columns in canonical alphabet order with the reference removed.
struct EncodedAlignment {
  Alphabet alphabet;
  std::vector<int> reference;  // per-site alphabet index of the wild-type
  // codes(i, j) in {0..K}: 0 = reference, c >= 1 = indicator column c-1.
  Eigen::MatrixXi codes;
  Eigen::VectorXd weights;  // omega; defaults to all ones
  MaskMatrix rare;          // d x |alphabet| flags, alphabet-state indexed
  int K = 0;

  int count() const { return static_cast<int>(codes.rows()); }
  int length() const { return static_cast<int>(codes.cols()); }

  // Alphabet index behind indicator column c (0-based, c in [0, K)).
  int column_symbol(int site, int c) const;
  // Code (0..K) of an alphabet state at a site; 0 iff it is the reference.
  int code_of_state(int site, int alphabet_idx) const;
  bool rare_code(int site, int code) const;  // code in 1..K

  double effective_sample_size() const { return weights.sum(); }
  EncodedAlignment subset(const std::vector<int>& rows) const;
};

// Encodes against a wild-type given as per-site alphabet indices. The rare
// mask is computed from the alignment at the given threshold.
EncodedAlignment encode(const Alignment& a, const std::vector<int>& wildtype,
                        int rare_min_count = 10);
// Convenience for single-character alphabets ("ACD-" style wild-type).
EncodedAlignment encode(const Alignment& a, const std::string& wildtype,
                        int rare_min_count = 10);

// Exact inverse of encode (ids are not preserved).
Alignment decode(const EncodedAlignment& enc);

// Debug dump: one header row of "site{j}:{symbol}" labels, then 0/1 rows.
void write_encoded_tsv(const EncodedAlignment& enc, const std::string& path);

}  // namespace pottsfit
