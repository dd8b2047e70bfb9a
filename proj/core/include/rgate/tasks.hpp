#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rgate/engine.hpp"
#include "rgate/numkit.hpp"

namespace rgate {

/// Reversed-binary adding task. All bit strings are least-significant-bit
/// first so the carry of position t feeds the output at t+1.
struct AddingSample {
  std::string a_bits;
  std::string b_bits;
  std::string s_bits;
};

/// Ripple-carry sum of two LSB-first bit strings of equal length.
/// Returns the L result bits; carry_out reports overflow past bit L-1.
std::string add_bitstrings(const std::string& a, const std::string& b, bool* carry_out);

/// Carry generated *into* each position (carry[t] is the carry consumed by
/// bit t; carry[0] = 0). Used by the carry-alignment probe.
std::vector<int> carry_bits(const std::string& a, const std::string& b);

/// Operands uniform over pairs whose sum fits in L bits (resample on overflow).
AddingSample gen_adding_sample(std::size_t len, Rng& rng);

/// Inputs are [a_t, b_t] 2-vectors; targets are the sum bits (per-step 2-class).
SeqSample encode_adding(const AddingSample& s);

/// Trailing-run counting task: label is the length of the maximal constant
/// run at the end of the bit string.
struct CountingSample {
  std::string bits;
  std::size_t count;
};

std::size_t trailing_run_length(const std::string& bits);
CountingSample gen_counting_sample(std::size_t len, Rng& rng);

/// Inputs are 2-dim one-hot per bit; single final target = count - 1
/// (L-way classification head).
SeqSample encode_counting(const CountingSample& s, std::size_t len);

/// Character stream split into contiguous train/valid/test index runs.
struct CharCorpus {
  std::string vocab;  // index -> character, in order of first appearance
  std::unordered_map<char, int> index;
  std::vector<int> train, valid, test;
  std::size_t unroll = 50;

  std::size_t vocab_size() const { return vocab.size(); }
};

CharCorpus build_char_corpus(const std::string& text, std::size_t unroll,
                             double train_frac, double valid_frac);

/// Smallest 1-indexed epoch whose test sequence-accuracy hits exactly 1.0;
/// nullopt when the budget ran out ("infinite").
std::optional<std::size_t> convergence_epoch(const std::vector<double>& accuracy_history);

}  // namespace rgate
