import type { TemplateDoc } from './types.js';

export interface ChainRow {
  template: TemplateDoc;
  depth: number;
}

/**
 * Flatten templates into parent-before-child rows for the chain view.
 *
 * Roots are templates without a parent in the set (providers, plus any
 * orphan whose parent was removed). Children sort by id under each parent,
 * so the layout is stable across reloads.
 */
export function chainRows(templates: TemplateDoc[]): ChainRow[] {
  const byId = new Map(templates.map((t) => [t.templateId, t]));
  const children = new Map<string, TemplateDoc[]>();
  const roots: TemplateDoc[] = [];
  for (const t of templates) {
    if (t.parentId && byId.has(t.parentId)) {
      const siblings = children.get(t.parentId) ?? [];
      siblings.push(t);
      children.set(t.parentId, siblings);
    } else {
      roots.push(t);
    }
  }
  const byTemplateId = (a: TemplateDoc, b: TemplateDoc) =>
    a.templateId < b.templateId ? -1 : a.templateId > b.templateId ? 1 : 0;
  roots.sort(byTemplateId);

  const rows: ChainRow[] = [];
  const walk = (t: TemplateDoc, depth: number) => {
    rows.push({ template: t, depth });
    for (const child of (children.get(t.templateId) ?? []).sort(byTemplateId)) {
      walk(child, depth + 1);
    }
  };
  for (const root of roots) walk(root, 0);
  return rows;
}

export function depthOf(templates: TemplateDoc[], templateId: string): number | undefined {
  return chainRows(templates).find((r) => r.template.templateId === templateId)?.depth;
}
