#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <stdexcept>

namespace decipher {

struct DegenerateSpectrum : std::runtime_error {
    explicit DegenerateSpectrum(double gap)
        : std::runtime_error("bigram spectrum degenerate (min relative singular-value gap " +
                             std::to_string(gap) + ")"),
          min_rel_gap(gap) {}
    double min_rel_gap;
};

// Diagonal of +/-1 aligning the columns of U_est with U_ref via the
// all-ones projection; falls back to the column inner product when the
// 1-projection of a column is too small to be trusted.
inline Eigen::VectorXd sign_match(const Eigen::MatrixXd& u_ref, const Eigen::MatrixXd& u_est) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(u_ref.rows());
    Eigen::VectorXd s(u_ref.cols());
    for (int k = 0; k < u_ref.cols(); ++k) {
        const double a = u_ref.col(k).dot(ones);
        const double b = u_est.col(k).dot(ones);
        double v;
        if (std::abs(a) >= 1e-8 && std::abs(b) >= 1e-8) v = a * b;
        else v = u_ref.col(k).dot(u_est.col(k));
        s(k) = v >= 0.0 ? 1.0 : -1.0;
    }
    return s;
}

struct SvdRecovery {
    Eigen::MatrixXd O;                 // U_x S U_y^T
    Eigen::MatrixXd O_alt;             // V_x T V_y^T
    Eigen::VectorXd singular_values;   // of B, descending
    double min_rel_gap = 0.0;
    double route_disagreement = 0.0;   // ||O - O_alt||_F
    bool degenerate_warning = false;

    // Average of the two recovery routes; what gets rounded on noisy stats.
    Eigen::MatrixXd blended() const { return 0.5 * (O + O_alt); }
};

// Analytic decoder recovery from plaintext bigram stats B and ciphertext
// bigram stats C. When C = P^T B P exactly and B has distinct non-zero
// singular values, the rounded result is P. With lenient=true a degenerate
// spectrum sets a warning flag instead of throwing.
inline SvdRecovery recover_svd(const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                               bool lenient = false) {
    if (B.rows() != B.cols() || C.rows() != C.cols() || B.rows() != C.rows())
        throw std::invalid_argument("B and C must be square with equal shape");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd_b(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_c(C, Eigen::ComputeFullU | Eigen::ComputeFullV);

    SvdRecovery rec;
    rec.singular_values = svd_b.singularValues();  // Eigen sorts descending
    const int n = static_cast<int>(B.rows());
    const double top = std::max(rec.singular_values(0), 1e-300);
    rec.min_rel_gap = rec.singular_values(n - 1) / top;  // distinctness from zero
    for (int k = 0; k + 1 < n; ++k)
        rec.min_rel_gap = std::min(rec.min_rel_gap,
                                   (rec.singular_values(k) - rec.singular_values(k + 1)) / top);
    if (rec.min_rel_gap < 1e-6) {
        if (!lenient) throw DegenerateSpectrum(rec.min_rel_gap);
        rec.degenerate_warning = true;
    }

    const Eigen::VectorXd s = sign_match(svd_b.matrixU(), svd_c.matrixU());
    const Eigen::VectorXd t = sign_match(svd_b.matrixV(), svd_c.matrixV());
    rec.O = svd_b.matrixU() * s.asDiagonal() * svd_c.matrixU().transpose();
    rec.O_alt = svd_b.matrixV() * t.asDiagonal() * svd_c.matrixV().transpose();
    rec.route_disagreement = (rec.O - rec.O_alt).norm();
    return rec;
}

}  // namespace decipher
