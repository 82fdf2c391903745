/**
 * Browser entry point: bind the studio app to the page and hash routing.
 */

import { StudioApi } from './api'
import { StudioApp } from './app'

const root = document.getElementById('app');
if (root) {
  const app = new StudioApp(root, new StudioApi(''), {
    onNavigate: (hash) => {
      if (window.location.hash !== hash) {
        window.history.replaceState(null, '', hash);
      }
    },
  });
  window.addEventListener('hashchange', () => void app.route(window.location.hash));
  void app.route(window.location.hash);
}
