export { CsvParseError, CsvTable, numericColumn, parseCsv, stringColumn } from "./csv";
export { fmt, linearScale, linearTicks, logScale, logTicks } from "./scale";
export {
  FIGURE_KINDS,
  FigureKind,
  KIND_ORIGIN,
  METHOD_ORDER,
  RenderOptions,
  render,
} from "./figures";
export { runCli } from "./cli";
