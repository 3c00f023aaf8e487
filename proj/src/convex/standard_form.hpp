// Conic standard form: min c'x s.t. Ax = b, Gx + s = h, s in K, with K a
// product of a nonnegative orthant and second-order cones.
#pragma once

#include <vector>

#include "lem/convex/program.hpp"

namespace lem::convex::detail {

/// Compressed sparse rows.
struct SparseRows {
    int cols = 0;
    std::vector<int> start{0};
    std::vector<int> index;
    std::vector<double> value;

    int rows() const { return static_cast<int>(start.size()) - 1; }
    void push_row(const std::vector<Term>& terms, double sign = 1.0);
    /// y += alpha * M x
    void gemv(const double* x, double* y, double alpha = 1.0) const;
    /// y += alpha * M' x
    void gemv_t(const double* x, double* y, double alpha = 1.0) const;
};

struct ConeDims {
    int lp = 0;
    std::vector<int> soc;  // sizes, each >= 2
    int total() const {
        int m = lp;
        for (int q : soc) m += q;
        return m;
    }
    int degree() const { return lp + static_cast<int>(soc.size()); }
};

enum class RowKind { none, equality, inequality, cone };

struct RowMap {
    RowKind kind = RowKind::none;
    int row = -1;   // row in A (equality) or G (others)
    int size = 1;   // cone size
    double sign = 1.0;  // multiplier to turn the internal dual into the reported one
};

struct StandardForm {
    int n = 0;           // all variables including epigraph helpers
    int n_model = 0;     // variables declared in the program
    std::vector<double> c;
    double c0 = 0.0;
    SparseRows A;
    std::vector<double> b;
    SparseRows G;
    std::vector<double> h;
    ConeDims cones;
    std::vector<RowMap> constraint_rows;  // per program constraint id
    std::vector<int> lower_row, upper_row;  // per model variable, G row or -1
    std::vector<int> fixed_row;             // per model variable, A row or -1
    std::vector<int> g_row_owner;           // program constraint id per G row, -1 for bounds/epigraph
};

StandardForm to_standard_form(const ConvexProgram& program);

}  // namespace lem::convex::detail
