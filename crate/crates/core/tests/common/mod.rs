pub mod dual_oracle;
