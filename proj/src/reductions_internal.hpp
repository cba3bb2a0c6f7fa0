#pragma once

#include <string>
#include <vector>

#include "msow/reductions.hpp"

namespace msow::detail {

using F = FormulaPtr;

inline F And(std::vector<F> k) { return conj(std::move(k)); }
inline F Or(std::vector<F> k) { return disj(std::move(k)); }
inline F Not(F f) { return neg(std::move(f)); }
inline F Imp(F a, F b) { return implies(std::move(a), std::move(b)); }
inline F Iff(F a, F b) { return iff(std::move(a), std::move(b)); }
inline F Lib(const std::string& name, std::vector<std::int64_t> params, std::vector<std::string> args) {
    return lib_call(name, std::move(params), std::move(args));
}
inline F leq(const std::string& x, const std::string& y) { return Or({prec(x, y), eq(x, y)}); }

LibBody tunion_body();
LibBody tmain_body();
LibBody tprec_body();
LibBody tone_body();
LibBody treeeq_body(std::int64_t k, std::int64_t b);
LibBody lit_body(std::int64_t i, std::int64_t q, std::int64_t h, std::int64_t b);
LibBody pm_body();
LibBody ceq_body();
LibBody ccycle_body();
LibBody cprec_body();

/// Rebuild a connective node with new children.
F rebuild(const Formula& f, std::vector<F> kids);

}  // namespace msow::detail
