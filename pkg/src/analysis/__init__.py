# Analysis modules 