pub mod ci;
pub mod data;
pub mod eval;
pub mod graph;
pub mod llm;
pub mod pc;
pub mod refine;
pub mod scm;
