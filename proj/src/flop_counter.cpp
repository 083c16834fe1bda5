#include "salign/flop_counter.hpp"

#include <string>

#include "salign/errors.hpp"

namespace salign::flops {

namespace {
thread_local Scope* g_scope = nullptr;
}

int cost::log2_exact(std::int64_t n) {
  if (n < 1 || (n & (n - 1)) != 0) throw ConfigError("size " + std::to_string(n) + " is not a power of two");
  int bits = 0;
  while ((std::int64_t{1} << bits) < n) ++bits;
  return bits;
}

void add(std::int64_t count) {
  if (g_scope != nullptr) g_scope->total_ += count;
}

Scope::Scope() : previous_(g_scope) { g_scope = this; }

Scope::~Scope() {
  g_scope = previous_;
  if (previous_ != nullptr) previous_->total_ += total_;
}

}  // namespace salign::flops
