#pragma once

// Small operator-splitting QP solver:
//
//   minimize  x'Px/2 + q'x   subject to  l <= Ax <= u
//
// ADMM in the OSQP form with a cached sparse LDL' factorization, adaptive
// step size and an active-set polishing pass that recovers a high-accuracy
// KKT point once the active set has settled.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string_view>

namespace nemopt::qp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

struct QuadraticProgram {
    SparseMatrix P;  // symmetric positive semidefinite, full storage
    Vector q;
    SparseMatrix A;
    Vector l;
    Vector u;
};

struct Settings {
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;
    double eps_prim = 1e-7;
    double eps_dual = 1e-7;
    double eps_obj = 1e-9;        // relative, over `obj_window` iterations
    int obj_window = 10;
    int max_iter = 100000;
    int check_every = 25;
    bool polish = true;
    double polish_delta = 1e-9;
    int refine_steps = 5;
};

enum class Status { solved, solved_polished, max_iterations };

std::string_view to_string(Status s);

struct Result {
    Vector x;
    Vector y;
    Status status = Status::max_iterations;
    int iterations = 0;
    double prim_res = 0.0;
    double dual_res = 0.0;
    double objective = 0.0;
    double objective_change = 0.0;
    int refactorizations = 0;
    bool polished = false;
};

Result solve(const QuadraticProgram& prob, const Settings& settings = {});

}  // namespace nemopt::qp
