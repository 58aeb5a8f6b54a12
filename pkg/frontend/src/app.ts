import { GatewayClient, GatewayError } from './client.js';
import {
  buildDeleteEnvelope,
  buildTemplateRegister,
  buildTemplateRemove,
  prepareSubmission,
} from './envelope.js';
import { watchInstances, type WatchHandle } from './poll.js';
import { chainRows } from './templates.js';
import type { Offer, SearchFilters, TemplateDoc } from './types.js';
import {
  renderDryRun,
  renderErrorBanner,
  renderHistory,
  renderInstances,
  renderNotice,
  renderOffers,
  renderParamsForm,
  renderTemplateRows,
} from './views.js';

type TabName = 'search' | 'instances' | 'templates';

interface AppState {
  client: GatewayClient;
  // Auth token lives here and nowhere else; a reload means re-entering it.
  connected: boolean;
  offers: Offer[];
  selectedOffer: Offer | null;
  selectedParams: string[];
  submitInFlight: boolean;
  watch: WatchHandle | null;
}

const $ = <T extends HTMLElement>(selector: string): T => {
  const el = document.querySelector<T>(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el;
};

function describeError(err: unknown): string {
  if (err instanceof GatewayError) {
    return err.status === 0 ? err.message : `${err.code}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

function main(): void {
  const state: AppState = {
    client: new GatewayClient({ baseUrl: 'http://127.0.0.1:8750' }),
    connected: false,
    offers: [],
    selectedOffer: null,
    selectedParams: [],
    submitInFlight: false,
    watch: null,
  };

  const banner = $('#banner');
  const showError = (err: unknown) => {
    banner.innerHTML = renderErrorBanner(describeError(err));
  };
  const showNotice = (message: string) => {
    banner.innerHTML = renderNotice(message);
  };
  const clearBanner = () => {
    banner.innerHTML = '';
  };

  // -- connection bar --

  const connect = async () => {
    const baseUrl = $<HTMLInputElement>('#gateway-url').value.trim();
    state.client.setBaseUrl(baseUrl);
    state.client.setToken($<HTMLInputElement>('#gateway-token').value);
    try {
      await state.client.health();
      state.connected = true;
      $('#health-dot').className = 'dot ok';
      showNotice(`connected to ${baseUrl}`);
      await refreshSearch({});
    } catch (err) {
      state.connected = false;
      $('#health-dot').className = 'dot bad';
      showError(err);
    }
  };
  $('#connect').addEventListener('click', () => void connect());

  // -- tabs --

  const showTab = (tab: TabName) => {
    for (const name of ['search', 'instances', 'templates'] as const) {
      $(`#panel-${name}`).hidden = name !== tab;
      $(`#tab-${name}`).classList.toggle('active', name === tab);
    }
    if (tab === 'instances') armWatch();
    if (tab === 'templates') void refreshTemplates();
  };
  for (const name of ['search', 'instances', 'templates'] as const) {
    $(`#tab-${name}`).addEventListener('click', () => showTab(name));
  }

  // -- search --

  const readFilters = (): SearchFilters => {
    const value = (id: string) => $<HTMLInputElement>(id).value.trim();
    const num = (id: string) => (value(id) === '' ? undefined : Number(value(id)));
    const filters: SearchFilters = {};
    const target = value('#f-target');
    if (target) filters.target = target;
    const minClass = $<HTMLSelectElement>('#f-class').value;
    if (minClass) filters.minClass = minClass;
    filters.nearLat = num('#f-lat');
    filters.nearLon = num('#f-lon');
    filters.radiusKm = num('#f-radius');
    filters.maxPrice = num('#f-price');
    filters.minEfficiency = num('#f-eff');
    const jurisdiction = $<HTMLSelectElement>('#f-jur').value;
    if (jurisdiction) filters.jurisdiction = jurisdiction;
    if ($<HTMLInputElement>('#f-gpu').checked) filters.needsGpu = true;
    return filters;
  };

  const refreshSearch = async (filters: SearchFilters) => {
    clearBanner();
    try {
      state.offers = await state.client.searchOffers(filters);
      $('#offers').innerHTML = renderOffers(state.offers);
    } catch (err) {
      state.offers = [];
      $('#offers').innerHTML = '';
      showError(err);
    }
  };

  $('#search-form').addEventListener('submit', (event) => {
    event.preventDefault();
    void refreshSearch(readFilters());
  });
  $('#browse-all').addEventListener('click', () => void refreshSearch({}));

  // -- instantiate --

  const openInstantiate = async (offerId: string) => {
    const offer = state.offers.find((o) => o.offerId === offerId);
    if (!offer) return;
    clearBanner();
    try {
      const templates = await state.client.exportTemplates();
      const doc = templates.find((t) => t.templateId === offer.customerTemplateId);
      state.selectedOffer = offer;
      state.selectedParams = doc?.declaredParams ?? [];
      $('#inst-offer').textContent = `${offer.offerId} (${offer.attributes.performanceClass}, ${
        offer.attributes.location.label ?? 'unlabelled'
      })`;
      $('#inst-params').innerHTML = renderParamsForm(state.selectedParams);
      $('#inst-output').innerHTML = '';
      $<HTMLInputElement>('#inst-dryrun').checked = false;
      $('#instantiate-panel').hidden = false;
    } catch (err) {
      showError(err);
    }
  };

  const submitInstantiate = async () => {
    const offer = state.selectedOffer;
    if (!offer || state.submitInFlight) return;
    const values: Record<string, string> = {};
    for (const input of document.querySelectorAll<HTMLInputElement>('#inst-params [data-param]')) {
      values[input.dataset['param'] ?? ''] = input.value;
    }
    const dryRun = $<HTMLInputElement>('#inst-dryrun').checked;
    const submission = prepareSubmission(offer, state.selectedParams, values, dryRun);

    if (submission.kind === 'blocked') {
      $('#inst-output').innerHTML = renderErrorBanner(
        `missing required parameter${submission.missing.length > 1 ? 's' : ''}: ${submission.missing.join(', ')}`,
      );
      return;
    }
    if (submission.kind === 'dryRun') {
      $('#inst-output').innerHTML = renderDryRun(submission.json);
      return;
    }

    state.submitInFlight = true;
    const button = $<HTMLButtonElement>('#inst-submit');
    button.disabled = true;
    try {
      const reply = await state.client.submit(submission.envelope);
      const instanceId = (reply.resultPayload?.['instanceId'] as string | undefined) ?? '?';
      showNotice(`accepted: ${reply.detail} (instance ${instanceId})`);
      $('#instantiate-panel').hidden = true;
      showTab('instances');
    } catch (err) {
      $('#inst-output').innerHTML = renderErrorBanner(describeError(err));
    } finally {
      state.submitInFlight = false;
      button.disabled = false;
    }
  };

  $('#inst-form').addEventListener('submit', (event) => {
    event.preventDefault();
    void submitInstantiate();
  });
  $('#inst-close').addEventListener('click', () => {
    $('#instantiate-panel').hidden = true;
  });

  // -- instances --

  const armWatch = () => {
    state.watch?.stop();
    state.watch = watchInstances(
      state.client,
      (instances) => {
        $('#instances').innerHTML = renderInstances(instances);
      },
      showError,
    );
  };
  $('#refresh-instances').addEventListener('click', armWatch);

  const terminate = async (instanceId: string, target: string) => {
    if (state.submitInFlight) return;
    state.submitInFlight = true;
    try {
      const reply = await state.client.submit(buildDeleteEnvelope(instanceId, target));
      showNotice(`accepted: ${reply.detail}`);
      armWatch();
    } catch (err) {
      showError(err);
    } finally {
      state.submitInFlight = false;
    }
  };

  const showInstanceHistory = async (instanceId: string) => {
    try {
      const doc = await state.client.getInstance(instanceId);
      $('#instance-detail').innerHTML =
        `<h4>${doc.instanceId}</h4>` + renderHistory(doc);
    } catch (err) {
      showError(err);
    }
  };

  // -- templates --

  const refreshTemplates = async () => {
    clearBanner();
    try {
      const templates = await state.client.exportTemplates();
      $('#templates').innerHTML = renderTemplateRows(chainRows(templates));
    } catch (err) {
      $('#templates').innerHTML = '';
      showError(err);
    }
  };

  const removeTemplate = async (templateId: string) => {
    try {
      await state.client.submit(buildTemplateRemove(templateId));
      showNotice(`removed template ${templateId}`);
      await refreshTemplates();
    } catch (err) {
      // InUse / CycleDetected come through code and detail untouched.
      showError(err);
    }
  };

  $('#tpl-form').addEventListener('submit', (event) => {
    event.preventDefault();
    void (async () => {
      let doc: TemplateDoc;
      try {
        doc = JSON.parse($<HTMLTextAreaElement>('#tpl-json').value) as TemplateDoc;
      } catch {
        showError(new Error('template document is not valid JSON'));
        return;
      }
      try {
        await state.client.submit(buildTemplateRegister(doc));
        showNotice(`registered template ${doc.templateId}`);
        $<HTMLTextAreaElement>('#tpl-json').value = '';
        await refreshTemplates();
      } catch (err) {
        showError(err);
      }
    })();
  });

  // -- delegated row actions --

  document.addEventListener('click', (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>('button[data-action]');
    if (!button) return;
    const data = button.dataset;
    switch (data['action']) {
      case 'instantiate':
        void openInstantiate(data['offerId'] ?? '');
        break;
      case 'terminate':
        void terminate(data['instanceId'] ?? '', data['target'] ?? 'VirtualMachine');
        break;
      case 'remove-template':
        void removeTemplate(data['templateId'] ?? '');
        break;
      default:
        break;
    }
  });

  document.addEventListener('click', (event) => {
    const row = (event.target as HTMLElement).closest<HTMLTableRowElement>('tr[data-instance-id]');
    if (row && !(event.target as HTMLElement).closest('button')) {
      void showInstanceHistory(row.dataset['instanceId'] ?? '');
    }
  });

  showTab('search');
}

main();
