/** Workspace document types, mirroring schema_version "1" exactly.
 * The UI never writes a divergent schema: documents round-trip through
 * these shapes untouched. */

export type ExprJson =
  | { kind: "number"; value: string }
  | { kind: "ident"; name: string; subscript: ExprJson | null }
  | { kind: "greek"; name: string; subscript: ExprJson | null }
  | { kind: "infinity" }
  | { kind: "binop"; op: string; left: ExprJson; right: ExprJson }
  | { kind: "neg"; operand: ExprJson }
  | { kind: "fraction"; numerator: ExprJson; denominator: ExprJson }
  | { kind: "power"; base: ExprJson; exponent: ExprJson }
  | { kind: "root"; degree: ExprJson | null; radicand: ExprJson }
  | { kind: "function"; name: string; argument: ExprJson }
  | { kind: "integral"; lower: ExprJson | null; upper: ExprJson | null;
      integrand: ExprJson; variable: ExprJson }
  | { kind: "sum"; index: ExprJson; lower: ExprJson; upper: ExprJson;
      body: ExprJson }
  | { kind: "product"; index: ExprJson; lower: ExprJson; upper: ExprJson;
      body: ExprJson }
  | { kind: "derivative"; order: number; partial: boolean;
      variable: ExprJson; body: ExprJson }
  | { kind: "group"; inner: ExprJson };

export interface EquationJson {
  id: string;
  expr: ExprJson;
  latex: string;
  parent_equation_id: string | null;
  annotation: string | null;
  position_override: [number, number] | null;
}

export interface MarkupPathJson {
  points: [number, number][];
  color: [number, number, number, number];
  thickness: number;
}

export interface ImageJson {
  id: string;
  media_type: string;
  data_base64: string;
}

export interface NodeJson {
  id: string;
  position: [number, number];
  size: [number, number];
  equations: EquationJson[];
  markup: MarkupPathJson[];
  images: ImageJson[];
}

export interface RenderOptionsJson {
  spacing_before_differential: boolean;
  implicit_mul_style: "juxtaposition" | "cdot";
  lowercase_default: boolean;
}

export interface PreferencesJson {
  decay: number;
  context_cap: number;
  render_options: RenderOptionsJson;
  equation_layout: "top_to_bottom" | "free";
}

export interface WorkspaceDoc {
  schema_version: "1";
  id: string;
  title: string;
  created: string;
  modified: string;
  preferences: PreferencesJson;
  nodes: NodeJson[];
  node_links: [string, string][];
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}
