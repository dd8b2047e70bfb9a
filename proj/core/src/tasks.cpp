#include "rgate/tasks.hpp"

namespace rgate {

std::string add_bitstrings(const std::string& a, const std::string& b, bool* carry_out) {
  if (a.size() != b.size()) throw DimError("add_bitstrings: length mismatch");
  std::string s(a.size(), '0');
  int carry = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const int sum = (a[t] - '0') + (b[t] - '0') + carry;
    s[t] = static_cast<char>('0' + (sum & 1));
    carry = sum >> 1;
  }
  if (carry_out) *carry_out = carry != 0;
  return s;
}

std::vector<int> carry_bits(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) throw DimError("carry_bits: length mismatch");
  std::vector<int> carries(a.size(), 0);
  int carry = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    carries[t] = carry;
    const int sum = (a[t] - '0') + (b[t] - '0') + carry;
    carry = sum >> 1;
  }
  return carries;
}

AddingSample gen_adding_sample(std::size_t len, Rng& rng) {
  if (len < 2) throw DimError("gen_adding_sample: len must be >= 2");
  AddingSample s;
  for (;;) {
    s.a_bits.assign(len, '0');
    s.b_bits.assign(len, '0');
    for (std::size_t t = 0; t < len; ++t) {
      s.a_bits[t] = rng.next_bit() ? '1' : '0';
      s.b_bits[t] = rng.next_bit() ? '1' : '0';
    }
    bool overflow = false;
    s.s_bits = add_bitstrings(s.a_bits, s.b_bits, &overflow);
    if (!overflow) return s;
  }
}

SeqSample encode_adding(const AddingSample& s) {
  SeqSample out;
  const std::size_t len = s.a_bits.size();
  out.inputs.resize(len);
  out.targets.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    out.inputs[t] = {static_cast<double>(s.a_bits[t] - '0'),
                     static_cast<double>(s.b_bits[t] - '0')};
    out.targets[t] = s.s_bits[t] - '0';
  }
  return out;
}

std::size_t trailing_run_length(const std::string& bits) {
  if (bits.empty()) throw DimError("trailing_run_length: empty string");
  const char last = bits.back();
  std::size_t run = 0;
  for (std::size_t i = bits.size(); i-- > 0 && bits[i] == last;) ++run;
  return run;
}

CountingSample gen_counting_sample(std::size_t len, Rng& rng) {
  if (len < 1) throw DimError("gen_counting_sample: len must be >= 1");
  CountingSample s;
  s.bits.assign(len, '0');
  for (std::size_t t = 0; t < len; ++t) s.bits[t] = rng.next_bit() ? '1' : '0';
  s.count = trailing_run_length(s.bits);
  return s;
}

SeqSample encode_counting(const CountingSample& s, std::size_t len) {
  if (s.bits.size() != len) throw DimError("encode_counting: length mismatch");
  SeqSample out;
  out.inputs.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    const bool one = s.bits[t] == '1';
    out.inputs[t] = {one ? 0.0 : 1.0, one ? 1.0 : 0.0};
  }
  out.targets = {static_cast<int>(s.count) - 1};
  return out;
}

CharCorpus build_char_corpus(const std::string& text, std::size_t unroll,
                             double train_frac, double valid_frac) {
  if (text.empty()) throw DimError("build_char_corpus: empty text");
  if (text.size() < 10 * unroll) throw DimError("build_char_corpus: text shorter than 10 x unroll");
  CharCorpus c;
  c.unroll = unroll;
  std::vector<int> stream;
  stream.reserve(text.size());
  for (char ch : text) {
    auto it = c.index.find(ch);
    if (it == c.index.end()) {
      it = c.index.emplace(ch, static_cast<int>(c.vocab.size())).first;
      c.vocab.push_back(ch);
    }
    stream.push_back(it->second);
  }
  const std::size_t n = stream.size();
  const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * train_frac);
  const auto n_valid = static_cast<std::size_t>(static_cast<double>(n) * valid_frac);
  c.train.assign(stream.begin(), stream.begin() + n_train);
  c.valid.assign(stream.begin() + n_train, stream.begin() + n_train + n_valid);
  c.test.assign(stream.begin() + n_train + n_valid, stream.end());
  return c;
}

std::optional<std::size_t> convergence_epoch(const std::vector<double>& accuracy_history) {
  if (accuracy_history.empty()) throw DimError("convergence_epoch: empty history");
  for (std::size_t e = 0; e < accuracy_history.size(); ++e)
    if (accuracy_history[e] == 1.0) return e + 1;
  return std::nullopt;
}

}  // namespace rgate
