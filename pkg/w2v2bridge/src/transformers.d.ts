// Optional runtime dependency, dynamically imported by the transformers
// backend only; typed as `any` so the package compiles without it installed.
declare module "@huggingface/transformers";
