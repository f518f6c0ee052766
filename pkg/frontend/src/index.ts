export { SCHEMA_COLUMNS, parseCsv, validateCsv } from "./csv.js";
export type { Row, SchemaReport, Series } from "./csv.js";
export { render } from "./figure.js";
export type { FigureKind, FigureSpec } from "./figure.js";
export { main } from "./cli.js";
