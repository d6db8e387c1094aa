// Binary tensor contraction with einsum-style subscripts, e.g.
// contract(a, b, "nhkm,nkv->nhvm"). Each letter is one axis; letters shared
// by both inputs and the output are batch axes, letters missing from the
// output are summed. Axes that appear in only one input and not the output
// are rejected (no implicit broadcasting or one-sided reduction), which
// keeps every contraction expressible as a batched GEMM and makes the
// gradient of contract(a,b,s) itself a contraction with permuted subscripts.
#pragma once

#include <array>

#include "latis/conv.hpp"
#include "latis/tensor.hpp"

namespace latis {
namespace detail {

struct ContractSpec {
  std::string a, b, out;
};

inline ContractSpec parse_contract_spec(const std::string& spec) {
  auto comma = spec.find(',');
  auto arrow = spec.find("->");
  if (comma == std::string::npos || arrow == std::string::npos ||
      comma > arrow)
    throw UsageError("contract: spec must look like \"ab,bc->ac\", got \"" +
                     spec + "\"");
  ContractSpec s;
  s.a = spec.substr(0, comma);
  s.b = spec.substr(comma + 1, arrow - comma - 1);
  s.out = spec.substr(arrow + 2);
  for (const std::string* part : {&s.a, &s.b, &s.out}) {
    for (char c : *part)
      if (c < 'a' || c > 'z')
        throw UsageError("contract: subscripts must be lowercase letters");
    for (size_t i = 0; i < part->size(); ++i)
      for (size_t j = i + 1; j < part->size(); ++j)
        if ((*part)[i] == (*part)[j])
          throw UsageError(
              "contract: repeated axis letter within one operand");
  }
  return s;
}

// Axis letters of `sub` grouped into (dims, strides) for one operand.
struct AxisGroup {
  std::vector<int> dims;
  std::vector<int64_t> strides;
  int64_t total = 1;

  void add(int dim, int64_t stride) {
    dims.push_back(dim);
    strides.push_back(stride);
    total *= dim;
  }
  // Memory offset of the linear index `li` (row-major over this group).
  int64_t offset(int64_t li) const {
    int64_t off = 0;
    for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
      off += (li % dims[i]) * strides[i];
      li /= dims[i];
    }
    return off;
  }
};

inline std::vector<int64_t> row_major_strides(const std::vector<int>& shape) {
  std::vector<int64_t> s(shape.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    s[i] = acc;
    acc *= shape[i];
  }
  return s;
}

// Plain-array contraction shared by the forward op and its backward calls.
template <typename T>
std::pair<std::vector<int>, std::vector<T>> contract_raw(
    const std::vector<int>& shape_a, const std::vector<T>& a,
    const std::vector<int>& shape_b, const std::vector<T>& b,
    const ContractSpec& s) {
  check_shape(shape_a.size() == s.a.size(),
              "contract: first operand rank does not match subscript \"" +
                  s.a + "\"");
  check_shape(shape_b.size() == s.b.size(),
              "contract: second operand rank does not match subscript \"" +
                  s.b + "\"");
  // Letter -> dimension, with consistency across operands.
  std::array<int, 26> dim;
  dim.fill(-1);
  auto bind = [&](const std::string& sub, const std::vector<int>& shape) {
    for (size_t i = 0; i < sub.size(); ++i) {
      int& d = dim[sub[i] - 'a'];
      if (d < 0)
        d = shape[i];
      else
        check_shape(d == shape[i],
                    std::string("contract: axis '") + sub[i] +
                        "' has conflicting sizes " + std::to_string(d) +
                        " and " + std::to_string(shape[i]));
    }
  };
  bind(s.a, shape_a);
  bind(s.b, shape_b);

  auto in_str = [](const std::string& str, char c) {
    return str.find(c) != std::string::npos;
  };
  std::string batch, mfree, nfree, contracted;
  auto classify = [&](char c) {
    const bool ia = in_str(s.a, c), ib = in_str(s.b, c), io = in_str(s.out, c);
    if (ia && ib && io) batch.push_back(c);
    else if (ia && !ib && io) mfree.push_back(c);
    else if (!ia && ib && io) nfree.push_back(c);
    else if (ia && ib && !io) contracted.push_back(c);
    else
      throw UsageError(std::string("contract: axis '") + c +
                       "' must appear in the output or in both operands");
  };
  std::string seen;
  for (char c : s.out) {
    check_shape(in_str(s.a, c) || in_str(s.b, c),
                std::string("contract: output axis '") + c +
                    "' missing from operands");
    classify(c);
    seen.push_back(c);
  }
  for (char c : s.a)
    if (!in_str(seen, c)) { classify(c); seen.push_back(c); }
  for (char c : s.b)
    if (!in_str(seen, c)) { classify(c); seen.push_back(c); }

  std::vector<int> out_shape;
  for (char c : s.out) out_shape.push_back(dim[c - 'a']);
  if (out_shape.empty()) out_shape = {1};

  auto strides_a = row_major_strides(shape_a);
  auto strides_b = row_major_strides(shape_b);
  auto strides_o = row_major_strides(out_shape);
  auto group = [&](const std::string& letters, const std::string& sub,
                   const std::vector<int64_t>& strides) {
    AxisGroup g;
    for (char c : letters) {
      auto pos = sub.find(c);
      g.add(dim[c - 'a'], pos == std::string::npos ? 0 : strides[pos]);
    }
    return g;
  };
  const AxisGroup Ba = group(batch, s.a, strides_a);
  const AxisGroup Bb = group(batch, s.b, strides_b);
  const AxisGroup Bo = group(batch, s.out, strides_o);
  const AxisGroup Ma = group(mfree, s.a, strides_a);
  const AxisGroup Mo = group(mfree, s.out, strides_o);
  const AxisGroup Nb = group(nfree, s.b, strides_b);
  const AxisGroup No = group(nfree, s.out, strides_o);
  const AxisGroup Ka = group(contracted, s.a, strides_a);
  const AxisGroup Kb = group(contracted, s.b, strides_b);
  const int64_t Bt = Ba.total, Mt = Ma.total, Nt = Nb.total, Kt = Ka.total;

  // Pack to canonical [B,M,K] and [B,K,N], batched GEMM, unpack to out order.
  std::vector<T> ap(Bt * Mt * Kt), bp(Bt * Kt * Nt), cp(Bt * Mt * Nt, T(0));
  for (int64_t bi = 0; bi < Bt; ++bi) {
    const int64_t boa = Ba.offset(bi);
    for (int64_t mi = 0; mi < Mt; ++mi) {
      const int64_t moa = boa + Ma.offset(mi);
      T* dst = ap.data() + (bi * Mt + mi) * Kt;
      for (int64_t ki = 0; ki < Kt; ++ki) dst[ki] = a[moa + Ka.offset(ki)];
    }
    const int64_t bob = Bb.offset(bi);
    for (int64_t ki = 0; ki < Kt; ++ki) {
      const int64_t kob = bob + Kb.offset(ki);
      T* dst = bp.data() + (bi * Kt + ki) * Nt;
      for (int64_t ni = 0; ni < Nt; ++ni) dst[ni] = b[kob + Nb.offset(ni)];
    }
  }
  for (int64_t bi = 0; bi < Bt; ++bi)
    gemm_accum(ap.data() + bi * Mt * Kt, bp.data() + bi * Kt * Nt,
               cp.data() + bi * Mt * Nt, Mt, Kt, Nt);
  int64_t out_numel = 1;
  for (int d : out_shape) out_numel *= d;
  std::vector<T> out(out_numel);
  for (int64_t bi = 0; bi < Bt; ++bi) {
    const int64_t boo = Bo.offset(bi);
    for (int64_t mi = 0; mi < Mt; ++mi) {
      const int64_t moo = boo + Mo.offset(mi);
      const T* src = cp.data() + (bi * Mt + mi) * Nt;
      for (int64_t ni = 0; ni < Nt; ++ni) out[moo + No.offset(ni)] = src[ni];
    }
  }
  return {std::move(out_shape), std::move(out)};
}

}  // namespace detail

template <typename T>
Tensor<T> contract(const Tensor<T>& a, const Tensor<T>& b,
                   const std::string& spec) {
  detail::ContractSpec s = detail::parse_contract_spec(spec);
  auto [out_shape, out_values] =
      detail::contract_raw(a.shape(), a.values(), b.shape(), b.values(), s);
  // d/da contract(a,b, "A,B->O") = contract(g,b, "O,B->A"); likewise for b.
  detail::ContractSpec ga{s.out, s.b, s.a};
  detail::ContractSpec gb{s.out, s.a, s.b};
  return detail::make_op<T>(
      "contract", std::move(out_shape), std::move(out_values), {a, b},
      [ga, gb](detail::Node<T>& self) {
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        const auto& ash = self.parents[0]->shape;
        const auto& bsh = self.parents[1]->shape;
        // A scalar result is stored as shape [1] even though its subscript
        // string is empty; the raw call wants the subscript's rank.
        std::vector<int> gshape =
            ga.a.empty() ? std::vector<int>{} : self.shape;
        if (self.parents[0]->requires_grad) {
          auto [sh, da] = detail::contract_raw(gshape, self.grad, bsh, bv, ga);
          auto& pg = self.parents[0]->grad_buffer();
          for (size_t i = 0; i < pg.size(); ++i) pg[i] += da[i];
        }
        if (self.parents[1]->requires_grad) {
          auto [sh, db] = detail::contract_raw(gshape, self.grad, ash, av, gb);
          auto& pg = self.parents[1]->grad_buffer();
          for (size_t i = 0; i < pg.size(); ++i) pg[i] += db[i];
        }
      });
}

}  // namespace latis
