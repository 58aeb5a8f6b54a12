import type { ChainRow } from './templates.js';
import type { InstanceDoc, Offer } from './types.js';
import { isSettled } from './types.js';

export function esc(value: unknown): string {
  return String(value)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderErrorBanner(message: string): string {
  return `<div class="banner error" role="alert">${esc(message)}</div>`;
}

export function renderNotice(message: string): string {
  return `<div class="banner notice">${esc(message)}</div>`;
}

/** Offer table in exactly the order the gateway returned. */
export function renderOffers(offers: Offer[]): string {
  if (offers.length === 0) {
    return '<div class="empty">no offers</div>';
  }
  const rows = offers
    .map((offer, index) => {
      const a = offer.attributes;
      return [
        `<tr data-offer-id="${esc(offer.offerId)}">`,
        `<td class="rank">${index + 1}</td>`,
        `<td class="mono">${esc(offer.offerId)}</td>`,
        `<td><span class="pill">${esc(a.performanceClass)}</span></td>`,
        `<td>${esc(a.location.label ?? `${a.location.latitudeDeg}, ${a.location.longitudeDeg}`)}</td>`,
        `<td class="num">${a.pricePerHour.toFixed(2)}/h</td>`,
        `<td class="num">${a.efficiencyScore.toFixed(2)}</td>`,
        `<td>${esc(a.jurisdiction)}</td>`,
        `<td class="mono">${esc(offer.providerId)}</td>`,
        `<td><button data-action="instantiate" data-offer-id="${esc(offer.offerId)}">Instantiate</button></td>`,
        '</tr>',
      ].join('');
    })
    .join('\n');
  return [
    '<table class="offers">',
    '<thead><tr><th></th><th>offer</th><th>class</th><th>location</th><th>price</th>',
    '<th>efficiency</th><th>jurisdiction</th><th>provider</th><th></th></tr></thead>',
    `<tbody>${rows}</tbody>`,
    '</table>',
  ].join('');
}

export function renderParamsForm(declared: string[], values: Record<string, string> = {}): string {
  if (declared.length === 0) {
    return '<p class="hint">this offer takes no parameters</p>';
  }
  return declared
    .map(
      (name) =>
        `<label class="param">${esc(name)} <span class="req">*</span>` +
        `<input name="param-${esc(name)}" data-param="${esc(name)}" value="${esc(values[name] ?? '')}"></label>`,
    )
    .join('\n');
}

export function renderDryRun(envelopeJson: string): string {
  return `<div class="dryrun"><h4>dry run: envelope that would be sent</h4><pre>${esc(envelopeJson)}</pre></div>`;
}

export function renderInstances(instances: InstanceDoc[]): string {
  if (instances.length === 0) {
    return '<div class="empty">no instances yet</div>';
  }
  const rows = instances
    .map((doc) => {
      const settled = isSettled(doc.state);
      const removable = doc.state === 'RUNNING';
      const last = doc.history[doc.history.length - 1];
      return [
        `<tr data-instance-id="${esc(doc.instanceId)}">`,
        `<td class="mono">${esc(doc.instanceId)}</td>`,
        `<td class="mono">${esc(doc.offerId)}</td>`,
        `<td><span class="state state-${esc(doc.state.toLowerCase())}${settled ? '' : ' busy'}">${esc(doc.state)}</span></td>`,
        `<td class="mono">${esc(doc.providerRef ?? '-')}</td>`,
        `<td class="muted">${esc(last?.reason ?? '')}</td>`,
        `<td>${
          removable
            ? `<button data-action="terminate" data-instance-id="${esc(doc.instanceId)}" data-target="${esc(doc.target)}">Terminate</button>`
            : ''
        }</td>`,
        '</tr>',
      ].join('');
    })
    .join('\n');
  return [
    '<table class="instances">',
    '<thead><tr><th>instance</th><th>offer</th><th>state</th><th>provider ref</th><th>note</th><th></th></tr></thead>',
    `<tbody>${rows}</tbody>`,
    '</table>',
  ].join('');
}

export function renderHistory(doc: InstanceDoc): string {
  const items = doc.history
    .map(
      (entry) =>
        `<li><span class="mono">${esc(entry.at)}</span> ${esc(entry.state)}${
          entry.reason ? ` <span class="muted">(${esc(entry.reason)})</span>` : ''
        }</li>`,
    )
    .join('');
  return `<ol class="history">${items}</ol>`;
}

const INDENT_PX = 18;

/** Chain view: one line per template, indented by its depth in the chain. */
export function renderTemplateRows(rows: ChainRow[]): string {
  if (rows.length === 0) {
    return '<div class="empty">no templates</div>';
  }
  return rows
    .map(({ template, depth }) => {
      const meta =
        template.layer === 'provider'
          ? `provider=${esc(template.providerId ?? '?')}`
          : `parent=${esc(template.parentId ?? '-')}`;
      const params = template.declaredParams.length
        ? ` <span class="muted">params: ${esc(template.declaredParams.join(', '))}</span>`
        : '';
      return (
        `<div class="tpl" data-template-id="${esc(template.templateId)}" style="padding-left:${depth * INDENT_PX}px">` +
        `<span class="layer layer-${esc(template.layer)}">${esc(template.layer)}</span> ` +
        `<span class="mono">${esc(template.templateId)}</span> ` +
        `<span class="muted">${meta}</span>${params} ` +
        `<button data-action="remove-template" data-template-id="${esc(template.templateId)}">Remove</button>` +
        '</div>'
      );
    })
    .join('\n');
}
