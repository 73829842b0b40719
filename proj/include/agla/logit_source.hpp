#pragma once

#include <cstddef>
#include <span>

#include "agla/numeric.hpp"
#include "agla/token.hpp"

namespace agla {

struct SpecialTokens {
  TokenId yes = 0;
  TokenId no = 1;
  TokenId eos = 2;
};

/// Anything that produces next-token logits for a visual view (patch
/// features of the original or the augmented image), a prompt and the
/// tokens generated so far. Implementations must be safe for concurrent
/// const use.
class LogitSource {
 public:
  virtual ~LogitSource() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual SpecialTokens special_tokens() const = 0;
  virtual Vector next_logits(const Matrix& view, std::span<const TokenId> prompt,
                             std::span<const TokenId> prefix) const = 0;
};

}  // namespace agla
